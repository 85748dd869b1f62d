// SPDX-License-Identifier: Apache-2.0

//! Simulation oracle: two independent copies of the chain run in lockstep
//! until they occupy the same state.
//!
//! Replica `r` of a run with master seed `s` draws from ChaCha8 seeded with
//! `s` on stream `r`, and aggregation uses integer sums, so estimates do not
//! depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::{StationaryDistribution, TransitionMatrix};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.5758293035489004;

/// Default censoring cap, `100·n²`.
pub fn default_cap(n: usize) -> u64 {
    100 * (n as u64) * (n as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairWalkRun {
    pub start: (usize, usize),
    /// `None` when the cap was reached first.
    pub steps_to_meet: Option<u64>,
    pub seed: u64,
}

impl PairWalkRun {
    pub fn is_censored(&self) -> bool {
        self.steps_to_meet.is_none()
    }
}

/// Precomputed cumulative rows for inverse-CDF stepping.
#[derive(Debug, Clone)]
pub struct PairWalker {
    n: usize,
    cumulative: Vec<f64>,
}

fn sample_cdf(cdf: &[f64], u: f64) -> usize {
    // first index whose cumulative mass exceeds u; the clamp absorbs rounding in the last entry
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

impl PairWalker {
    pub fn new(p: &TransitionMatrix) -> Self {
        let n = p.n();
        let mut cumulative = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += p.get(i, j);
                cumulative.push(acc);
            }
        }
        Self { n, cumulative }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step<R: Rng>(&self, state: usize, rng: &mut R) -> usize {
        let row = &self.cumulative[state * self.n..(state + 1) * self.n];
        sample_cdf(row, rng.random::<f64>() * row[self.n - 1])
    }

    /// First `t ≥ 0` with `X_t = Y_t`, or `None` after `cap` steps.
    pub fn meet<R: Rng>(&self, mut x: usize, mut y: usize, cap: u64, rng: &mut R) -> Option<u64> {
        if x == y {
            return Some(0);
        }
        for t in 1..=cap {
            x = self.step(x, rng);
            y = self.step(y, rng);
            if x == y {
                return Some(t);
            }
        }
        None
    }
}

fn check_state(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::invalid(format!("state {i} out of range for {n} states")));
    }
    Ok(())
}

/// One pair walk from `(i, j)` (0-based), deterministic in `seed`.
pub fn simulate_pair(p: &TransitionMatrix, i: usize, j: usize, seed: u64, cap: u64) -> Result<PairWalkRun> {
    check_state(i, p.n())?;
    check_state(j, p.n())?;
    if cap == 0 {
        return Err(Error::invalid("cap must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = PairWalker::new(p).meet(i, j, cap, &mut rng);
    Ok(PairWalkRun { start: (i, j), steps_to_meet: steps, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// 99% normal-approximation half width.
    pub ci_half_width: f64,
    pub replicas: u64,
    /// Replicas stopped at the cap; they enter the mean as `cap`.
    pub censored: u64,
    pub cap: u64,
    pub seed: u64,
}

impl McEstimate {
    /// No replica was censored, so `mean` estimates the expectation itself
    /// rather than a lower bound for it.
    pub fn is_clean(&self) -> bool {
        self.censored == 0
    }

    pub fn ci(&self) -> (f64, f64) {
        (self.mean - self.ci_half_width, self.mean + self.ci_half_width)
    }

    /// Whether `[lo, hi]` meets this estimate's interval.
    pub fn overlaps(&self, lo: f64, hi: f64) -> bool {
        let (a, b) = self.ci();
        a <= hi && lo <= b
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

const CHUNK: u64 = 1024;

#[derive(Default, Clone, Copy)]
struct Tally {
    sum: u128,
    sum_sq: u128,
    censored: u64,
}

/// Estimates `t^π` by drawing `(i, j) ~ π⊗π` independently per replica.
pub fn estimate_tmeet_pi(p: &TransitionMatrix, pi: &StationaryDistribution, replicas: u64, seed: u64, cap: u64) -> Result<McEstimate> {
    Error::check_len(p.n(), pi.len())?;
    if replicas == 0 {
        return Err(Error::invalid("at least one replica is required"));
    }
    if cap == 0 {
        return Err(Error::invalid("cap must be at least 1"));
    }
    let walker = PairWalker::new(p);
    let mut pi_cdf: Vec<f64> = Vec::with_capacity(pi.len());
    let mut acc = 0.0;
    for &x in pi.as_slice() {
        acc += x;
        pi_cdf.push(acc);
    }
    let total_mass = acc;

    let chunks = replicas.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tally::default();
            for r in c * CHUNK..((c + 1) * CHUNK).min(replicas) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r);
                let i = sample_cdf(&pi_cdf, rng.random::<f64>() * total_mass);
                let j = sample_cdf(&pi_cdf, rng.random::<f64>() * total_mass);
                let steps = match walker.meet(i, j, cap, &mut rng) {
                    Some(s) => s,
                    None => {
                        t.censored += 1;
                        cap
                    }
                };
                t.sum += steps as u128;
                t.sum_sq += (steps as u128) * (steps as u128);
            }
            t
        })
        .reduce(Tally::default, |a, b| Tally { sum: a.sum + b.sum, sum_sq: a.sum_sq + b.sum_sq, censored: a.censored + b.censored });

    let r = replicas as f64;
    let mean = tally.sum as f64 / r;
    let var = if replicas > 1 { ((tally.sum_sq as f64 - r * mean * mean) / (r - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, ci_half_width: Z_99 * (var / r).sqrt(), replicas, censored: tally.censored, cap, seed })
}
