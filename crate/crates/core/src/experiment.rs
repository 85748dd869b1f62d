// SPDX-License-Identifier: Apache-2.0

//! Erdős–Rényi sweeps and concentration-event studies.
//!
//! Per-seed work runs on the rayon pool; results are collected in seed
//! order, so output is identical for any thread count.

use std::io::Write;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::{adjacency_sigma2, codegree_stats, degree_stats, er_sample, ErParams, EventFlags, Graph, SIGMA2_CEILING};
use crate::markov::{srw_from_graph, stationary, StationaryDistribution, TransitionMatrix};
use crate::meeting::{rank_k_tmeet, solve_pair_system, spectral_tmeet, svd_killed, tmeet_pi, SolveOptions};
use crate::montecarlo::{default_cap, estimate_tmeet_pi};
use crate::perturb::{nu_from_eps, perturbation_report, PerturbationReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Spectral,
    RankK { k: usize },
    Mc { replicas: u64 },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Exact => "exact".into(),
            Method::Spectral => "spectral".into(),
            Method::RankK { k } => format!("rank-k({k})"),
            Method::Mc { replicas } => format!("mc({replicas})"),
        }
    }
}

/// Result of one `t^π` computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeetingEstimate {
    pub tmeet_pi: f64,
    /// Rank-k error bound or Monte Carlo 99% half width.
    pub uncertainty: Option<f64>,
    /// Monte Carlo only: censored replicas (nonzero means `tmeet_pi` is a lower bound).
    pub censored: Option<u64>,
}

/// `t^π` of one chain by the chosen method. `seed` only matters for Monte Carlo.
pub fn compute_tmeet(p: &TransitionMatrix, pi: &StationaryDistribution, method: Method, seed: u64) -> Result<MeetingEstimate> {
    let plain = |t| MeetingEstimate { tmeet_pi: t, uncertainty: None, censored: None };
    match method {
        Method::Exact => {
            let m = solve_pair_system(p, &SolveOptions::default())?.meeting_times();
            Ok(plain(tmeet_pi(&m, pi)?))
        }
        Method::Spectral => Ok(plain(spectral_tmeet(&svd_killed(p, None)?, pi)?)),
        Method::RankK { k } => {
            let nn = p.n() * p.n();
            let held = if k >= nn { nn } else { k + 1 };
            let r = rank_k_tmeet(&svd_killed(p, Some(held))?, pi, k)?;
            Ok(MeetingEstimate { tmeet_pi: r.value, uncertainty: Some(r.bound), censored: None })
        }
        Method::Mc { replicas } => {
            let e = estimate_tmeet_pi(p, pi, replicas, seed, default_cap(p.n()))?;
            Ok(MeetingEstimate { tmeet_pi: e.mean, uncertainty: Some(e.ci_half_width), censored: Some(e.censored) })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EdgeProbability {
    /// `p = min(c·n^(β−1), 1)`.
    Beta { beta: f64, c: f64 },
    Fixed { p: f64 },
}

impl EdgeProbability {
    pub fn params(&self, n: usize) -> Result<ErParams> {
        match *self {
            EdgeProbability::Beta { beta, c } => ErParams::from_beta(n, beta, c),
            EdgeProbability::Fixed { p } => ErParams::from_p(n, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub edge_probability: EdgeProbability,
    pub seeds: u64,
    pub master_seed: u64,
    /// Tolerance for `|t^π/n − 1|`.
    pub epsilon: f64,
    /// Norm-estimate tolerance; sets `ν1 = ν2`.
    pub epsilon1: f64,
    pub method: Method,
    /// Replace `P` by `(I + P)/2`.
    pub lazy: bool,
    /// Attach a perturbation report to every record.
    pub perturb: bool,
}

impl ExperimentConfig {
    pub fn new(sizes: Vec<usize>, edge_probability: EdgeProbability, seeds: u64, master_seed: u64) -> Self {
        Self { sizes, edge_probability, seeds, master_seed, epsilon: 0.1, epsilon1: 0.5, method: Method::Exact, lazy: false, perturb: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::invalid("sizes must be a nonempty list of positive integers"));
        }
        if self.seeds == 0 {
            return Err(Error::invalid("at least one seed is required"));
        }
        if !(self.epsilon > 0.0) || !(self.epsilon1 > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        match self.method {
            Method::RankK { k: 0 } => return Err(Error::invalid("rank k must be positive")),
            Method::Mc { replicas: 0 } => return Err(Error::invalid("replicas must be positive")),
            _ => {}
        }
        for &n in &self.sizes {
            self.edge_probability.params(n)?;
        }
        Ok(())
    }
}

/// Seed of run `index` under `master`: first word of ChaCha8 stream `index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub n: usize,
    pub p: f64,
    pub d: f64,
    pub connected: bool,
    /// Disconnected or isolated-vertex sample; no meeting time computed.
    pub skipped: bool,
    pub r1: f64,
    pub r2: f64,
    pub sigma2_scaled: f64,
    pub event_flags: EventFlags,
    pub tmeet_pi: Option<f64>,
    pub tmeet_over_n: Option<f64>,
    pub uncertainty: Option<f64>,
    pub censored: Option<u64>,
    pub method: String,
    pub perturb_report: Option<PerturbationReport>,
    pub error: Option<String>,
    pub wall_time: f64,
}

fn graph_stats(g: &Graph, d: f64) -> Result<(f64, f64, f64)> {
    Ok((degree_stats(g, d)?.r1, codegree_stats(g, d)?.r2, adjacency_sigma2(g, d)?))
}

fn run_one(cfg: &ExperimentConfig, n: usize, seed: u64, nu: (f64, f64)) -> RunRecord {
    let start = Instant::now();
    let params = cfg.edge_probability.params(n).expect("validated");
    let g = er_sample(&params, seed);
    let connected = g.is_connected();
    let skipped = !connected || g.isolated_vertex().is_some();
    let mut rec = RunRecord {
        seed,
        n,
        p: params.p,
        d: params.d,
        connected,
        skipped,
        r1: f64::NAN,
        r2: f64::NAN,
        sigma2_scaled: f64::NAN,
        event_flags: EventFlags { f_nu1: false, f_nu1_nu2: false, f_sigma: false },
        tmeet_pi: None,
        tmeet_over_n: None,
        uncertainty: None,
        censored: None,
        method: cfg.method.label(),
        perturb_report: None,
        error: None,
        wall_time: 0.0,
    };
    let outcome = (|| -> Result<()> {
        if params.d > 0.0 && n >= 2 {
            let (r1, r2, s2) = graph_stats(&g, params.d)?;
            rec.r1 = r1;
            rec.r2 = r2;
            rec.sigma2_scaled = s2;
            rec.event_flags = EventFlags::evaluate(r1, r2, s2, nu.0, nu.1);
        }
        if skipped {
            return Ok(());
        }
        let mut p = srw_from_graph(&g)?;
        if cfg.lazy {
            p = p.lazy();
        }
        let pi = stationary(&p)?;
        let est = compute_tmeet(&p, &pi, cfg.method, seed)?;
        rec.tmeet_pi = Some(est.tmeet_pi);
        rec.tmeet_over_n = Some(est.tmeet_pi / n as f64);
        rec.uncertainty = est.uncertainty;
        rec.censored = est.censored;
        if cfg.perturb {
            rec.perturb_report = Some(perturbation_report(&p, &pi, None, Some(cfg.epsilon1))?);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    rec
}

/// Runs every `(size, seed)` pair. Per-seed failures are stored in the
/// record instead of aborting the sweep.
pub fn run_er_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let nu = nu_from_eps(cfg.epsilon1)?;
    let jobs: Vec<(usize, u64)> =
        cfg.sizes.iter().flat_map(|&n| (0..cfg.seeds).map(move |i| (n, derive_seed(cfg.master_seed, i)))).collect();
    Ok(jobs.par_iter().map(|&(n, seed)| run_one(cfg, n, seed, nu)).collect())
}

/// `2n·exp(−ν1²d/3) + 2·C(n,2)·exp(−ν2²d²/(3n))`; the `exp(−θ(log n)²)` term
/// has no known constant and is left out.
pub fn deviation_probability_bound(n: usize, d: f64, nu1: f64, nu2: f64) -> f64 {
    let nf = n as f64;
    2.0 * nf * (-nu1 * nu1 * d / 3.0).exp() + nf * (nf - 1.0) * (-nu2 * nu2 * d * d / (3.0 * nf)).exp()
}

pub const THETA_TERM: &str = "exp(-theta (log n)^2), theta unknown (omitted)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub n: usize,
    pub p: f64,
    pub d: f64,
    pub seeds: usize,
    pub skipped: usize,
    pub errors: usize,
    pub computed: usize,
    pub mean_tmeet_over_n: Option<f64>,
    pub mean_abs_deviation: Option<f64>,
    pub max_abs_deviation: Option<f64>,
    pub epsilon: f64,
    /// Share of computed runs with `|t^π/n − 1| > ε`.
    pub exceed_frequency: Option<f64>,
    pub probability_bound: f64,
    pub omitted_term: &'static str,
}

pub fn summarize(cfg: &ExperimentConfig, records: &[RunRecord]) -> Result<Vec<SweepSummary>> {
    let (nu1, nu2) = nu_from_eps(cfg.epsilon1)?;
    let mut out = Vec::new();
    for &n in &cfg.sizes {
        let params = cfg.edge_probability.params(n)?;
        let rs: Vec<&RunRecord> = records.iter().filter(|r| r.n == n).collect();
        let ratios: Vec<f64> = rs.iter().filter_map(|r| r.tmeet_over_n).collect();
        let k = ratios.len() as f64;
        let mean = |f: &dyn Fn(f64) -> f64| (!ratios.is_empty()).then(|| ratios.iter().map(|&x| f(x)).sum::<f64>() / k);
        out.push(SweepSummary {
            n,
            p: params.p,
            d: params.d,
            seeds: rs.len(),
            skipped: rs.iter().filter(|r| r.skipped).count(),
            errors: rs.iter().filter(|r| r.error.is_some()).count(),
            computed: ratios.len(),
            mean_tmeet_over_n: mean(&|x| x),
            mean_abs_deviation: mean(&|x| (x - 1.0).abs()),
            max_abs_deviation: ratios.iter().map(|x| (x - 1.0).abs()).reduce(f64::max),
            epsilon: cfg.epsilon,
            exceed_frequency: mean(&|x| if (x - 1.0).abs() > cfg.epsilon { 1.0 } else { 0.0 }),
            probability_bound: deviation_probability_bound(n, params.d, nu1, nu2),
            omitted_term: THETA_TERM,
        });
    }
    Ok(out)
}

pub fn write_json_lines<W: Write, T: Serialize>(items: &[T], mut out: W) -> Result<()> {
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub const CSV_COLUMNS: [&str; 19] = [
    "seed", "n", "p", "d", "connected", "skipped", "r1", "r2", "sigma2_scaled", "f_nu1", "f_nu1_nu2", "f_sigma", "tmeet_pi",
    "tmeet_over_n", "uncertainty", "censored", "method", "error", "wall_time",
];

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Flat CSV with one row per record; the nested perturbation report is omitted.
pub fn write_records_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in records {
        w.write_record([
            r.seed.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            r.d.to_string(),
            r.connected.to_string(),
            r.skipped.to_string(),
            r.r1.to_string(),
            r.r2.to_string(),
            r.sigma2_scaled.to_string(),
            r.event_flags.f_nu1.to_string(),
            r.event_flags.f_nu1_nu2.to_string(),
            r.event_flags.f_sigma.to_string(),
            opt(r.tmeet_pi),
            opt(r.tmeet_over_n),
            opt(r.uncertainty),
            opt(r.censored),
            r.method.clone(),
            r.error.clone().unwrap_or_default(),
            r.wall_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `n mean(t^π/n)` lines.
pub fn write_size_plot_data<W: Write>(summaries: &[SweepSummary], mut out: W) -> Result<()> {
    writeln!(out, "# n mean_tmeet_over_n")?;
    for s in summaries {
        if let Some(m) = s.mean_tmeet_over_n {
            writeln!(out, "{} {}", s.n, m)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankKPoint {
    pub k: usize,
    pub error: f64,
    pub bound: f64,
}

/// Rank-k truncation error against the exact value for `k = 1, 2, 4, …, n²`.
pub fn rank_k_error_curve(p: &TransitionMatrix, pi: &StationaryDistribution) -> Result<Vec<RankKPoint>> {
    let exact = tmeet_pi(&solve_pair_system(p, &SolveOptions::default())?.meeting_times(), pi)?;
    let svd = svd_killed(p, None)?;
    let nn = p.n() * p.n();
    let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |k| Some(k * 2)).take_while(|&k| k < nn).collect();
    ks.push(nn);
    ks.into_iter()
        .map(|k| {
            let r = rank_k_tmeet(&svd, pi, k)?;
            Ok(RankKPoint { k, error: (r.value - exact).abs(), bound: r.bound })
        })
        .collect()
}

/// `k error` lines.
pub fn write_rank_k_plot_data<W: Write>(points: &[RankKPoint], mut out: W) -> Result<()> {
    writeln!(out, "# k rank_k_error")?;
    for pt in points {
        writeln!(out, "{} {}", pt.k, pt.error)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventFrequency {
    pub frequency: f64,
    pub standard_error: f64,
    /// Analytic upper bound on the probability, when one exists.
    pub bound: Option<f64>,
    /// `frequency ≤ bound + 3·standard_error`.
    pub pass: Option<bool>,
}

impl EventFrequency {
    fn new(hits: usize, trials: usize, bound: Option<f64>) -> Self {
        let f = hits as f64 / trials as f64;
        let se = (f * (1.0 - f) / trials as f64).sqrt();
        Self { frequency: f, standard_error: se, bound, pass: bound.map(|b| f <= b + 3.0 * se) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub n: usize,
    pub p: f64,
    pub seeds: usize,
    pub nu1: f64,
    pub nu2: f64,
    pub r1_exceeds: EventFrequency,
    pub r2_exceeds: EventFrequency,
    pub sigma2_exceeds: EventFrequency,
}

/// Frequencies of `{R1 > ν1}`, `{R2 > ν2}` and `{σ2(A/√d) > 8}` over
/// independent samples of G(n, p), against `2n·exp(−ν1²np/3)` and
/// `2·C(n,2)·exp(−ν2²np²/3)`.
pub fn concentration_study(n: usize, p: f64, seeds: usize, nu1: f64, nu2: f64, master_seed: u64) -> Result<ConcentrationReport> {
    if seeds < 30 {
        return Err(Error::invalid(format!("concentration study needs at least 30 seeds, got {seeds}")));
    }
    if !(nu1 > 0.0 && nu2 > 0.0) {
        return Err(Error::invalid("nu1 and nu2 must be positive"));
    }
    let params = ErParams::from_p(n, p)?;
    if !(params.d > 0.0) || n < 2 {
        return Err(Error::invalid("need n >= 2 and p > 0"));
    }
    let stats: Vec<(f64, f64, f64)> = (0..seeds as u64)
        .into_par_iter()
        .map(|i| graph_stats(&er_sample(&params, derive_seed(master_seed, i)), params.d))
        .collect::<Result<_>>()?;
    let nf = n as f64;
    let b1 = 2.0 * nf * (-nu1 * nu1 * nf * p / 3.0).exp();
    let b2 = nf * (nf - 1.0) * (-nu2 * nu2 * nf * p * p / 3.0).exp();
    Ok(ConcentrationReport {
        n,
        p,
        seeds,
        nu1,
        nu2,
        r1_exceeds: EventFrequency::new(stats.iter().filter(|s| s.0 > nu1).count(), seeds, Some(b1)),
        r2_exceeds: EventFrequency::new(stats.iter().filter(|s| s.1 > nu2).count(), seeds, Some(b2)),
        sigma2_exceeds: EventFrequency::new(stats.iter().filter(|s| s.2 > SIGMA2_CEILING).count(), seeds, None),
    })
}
