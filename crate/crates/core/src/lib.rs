// SPDX-License-Identifier: Apache-2.0

//! Expected meeting times of two independent copies of a Markov chain,
//! computed from the singular value decomposition of the pair-space
//! generator with the meeting set killed.

pub mod eigs;
pub mod error;
pub mod experiment;
pub mod graphs;
pub mod krylov;
pub mod linalg;
pub mod markov;
pub mod meeting;
pub mod montecarlo;
pub mod pairspace;
pub mod perturb;
pub mod spectral;

pub use error::{Error, Result};
pub use experiment::{compute_tmeet, run_er_experiment, EdgeProbability, ExperimentConfig, MeetingEstimate, Method, RunRecord};
pub use graphs::{er_sample, ErParams, Graph};
pub use linalg::LinearOperator;
pub use markov::{srw_from_graph, stationary, StationaryDistribution, TransitionMatrix};
pub use meeting::{exact_meeting_times, rank_k_tmeet, spectral_tmeet, svd_killed, tmeet_pi, MeetingTimeMatrix, RankKApprox, SvdResult};
pub use montecarlo::{estimate_tmeet_pi, simulate_pair, McEstimate, PairWalkRun};
pub use pairspace::{PairIndex, PairMode, PairOperator};
pub use perturb::{perturbation_report, PerturbationReport, SigmaBounds, StewartBlocks};
