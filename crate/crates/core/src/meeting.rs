// SPDX-License-Identifier: Apache-2.0

//! Expected meeting times: the exact pair-space solve, the SVD spectral
//! formula and its certified rank-k truncation.
//!
//! Everything is phrased through `w = L_kill⁻¹ 1`. Off the diagonal `w`
//! holds the meeting times; on the diagonal it holds the expected return
//! time of the pair to `D`, and `Σ π_i² w_ii = 1`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::krylov::{gmres, GmresOptions};
use crate::linalg::{dot, LinearOperator};
use crate::markov::{check_irreducible, period, write_matrix_csv, StationaryDistribution, TransitionMatrix};
use crate::pairspace::{PairOperator, DEFAULT_DENSE_THRESHOLD};
use crate::spectral::{smallest_singular_triplets, SvdsOptions};

/// Systems whose ∞-norm condition number exceeds this are reported singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Dense LU up to this base dimension, GMRES above it.
    pub dense_threshold: usize,
    /// GMRES iteration cap per base dimension.
    pub iterations_per_state: usize,
    pub rel_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { dense_threshold: DEFAULT_DENSE_THRESHOLD, iterations_per_state: 50, rel_tol: 1e-10 }
    }
}

/// Solution `w` of `L_kill w = 1`.
#[derive(Debug, Clone)]
pub struct PairSolution {
    n: usize,
    w: Vec<f64>,
    condition: f64,
}

impl PairSolution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// Exact `‖L_kill‖_∞ ‖L_kill⁻¹‖_∞`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `Σ_i π_i² w_ii`, which equals 1.
    pub fn diagonal_identity(&self, pi: &StationaryDistribution) -> Result<f64> {
        Error::check_len(self.n, pi.len())?;
        let pi = pi.as_slice();
        Ok((0..self.n).map(|i| pi[i] * pi[i] * self.w[i * (self.n + 1)]).sum())
    }

    /// `max |W − 11ᵗ − P(W − W_d)Pᵗ|` with `W` the reshaped solution.
    pub fn recursion_residual(&self, p: &TransitionMatrix) -> Result<f64> {
        Error::check_len(self.n, p.n())?;
        let lw = PairOperator::killed(p).apply(&self.w);
        Ok(lw.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max))
    }

    pub fn meeting_times(&self) -> MeetingTimeMatrix {
        let n = self.n;
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { self.w[i * n + j] });
        MeetingTimeMatrix { m }
    }
}

/// `M[i][j] = E τ_meet(i, j)`, zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MeetingTimeMatrix {
    m: DMatrix<f64>,
}

impl MeetingTimeMatrix {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension { expected: m.nrows(), actual: m.ncols() });
        }
        Ok(Self { m })
    }

    pub fn n(&self) -> usize {
        self.m.nrows()
    }

    /// 0-based entry.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.m - self.m.transpose()).amax()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(&self.m, out)
    }
}

fn singular(p: &TransitionMatrix, condition: f64) -> Error {
    Error::InfiniteMeetingTime { condition, period: period(p) }
}

/// `‖L_kill‖_∞`. Row `(i, j)` of `Q = (P⊗P)E` sums to `1 − (PPᵗ)_ij` and
/// has diagonal `P_ii P_jj` for `i ≠ j`, so the row of `I − Q` has absolute
/// sum `1 − 2 Q_rr + rowsum(Q)`.
fn lkill_inf_norm(p: &TransitionMatrix) -> f64 {
    let pm = p.matrix();
    let ppt = pm * p.transpose();
    let n = p.n();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let q_rr = if i == j { 0.0 } else { pm[(i, i)] * pm[(j, j)] };
            best = best.max(1.0 - 2.0 * q_rr + (1.0 - ppt[(i, j)]));
        }
    }
    best
}

/// Solves `L_kill w = 1`.
///
/// An irreducible chain of period `d > 1` is rejected up front: walkers in
/// different cyclic classes never meet. Otherwise `L_kill⁻¹ = Σ Qᵏ ≥ 0`
/// entrywise, which makes `‖L_kill⁻¹‖_∞ = max w` and forces every `w ≥ 1`.
pub fn solve_pair_system(p: &TransitionMatrix, opts: &SolveOptions) -> Result<PairSolution> {
    let n = p.n();
    if check_irreducible(p) {
        if let Some(d) = period(p).filter(|&d| d > 1) {
            return Err(Error::InfiniteMeetingTime { condition: f64::INFINITY, period: Some(d) });
        }
    }
    let op = PairOperator::killed(p);
    let ones = vec![1.0; n * n];
    let w: Vec<f64> = if n <= opts.dense_threshold {
        let lu = op.materialize_with_threshold(opts.dense_threshold)?.lu();
        match lu.solve(&DVector::from_vec(ones)) {
            Some(x) => x.data.into(),
            None => return Err(singular(p, f64::INFINITY)),
        }
    } else {
        let gm = GmresOptions::new(opts.iterations_per_state * n, opts.rel_tol);
        gmres(|x| op.apply(x), &ones, None, &gm)?.x
    };

    if w.iter().any(|x| !x.is_finite()) {
        return Err(singular(p, f64::INFINITY));
    }
    let max_w = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = lkill_inf_norm(p) * max_w;
    // a nonnegative inverse cannot produce entries below 1
    if min_w < 1.0 - 1e-6 || !(condition <= CONDITION_LIMIT) {
        return Err(singular(p, if min_w < 1.0 - 1e-6 { f64::INFINITY } else { condition }));
    }
    Ok(PairSolution { n, w, condition })
}

pub fn exact_meeting_times(p: &TransitionMatrix) -> Result<MeetingTimeMatrix> {
    Ok(solve_pair_system(p, &SolveOptions::default())?.meeting_times())
}

/// `Σ_{i≠j} π_i π_j M[i][j]`.
pub fn tmeet_pi(m: &MeetingTimeMatrix, pi: &StationaryDistribution) -> Result<f64> {
    Error::check_len(m.n(), pi.len())?;
    let pi = pi.as_slice();
    let n = m.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += pi[i] * pi[j] * m.m[(i, j)];
            }
        }
    }
    Ok(total)
}

/// Singular triplets of `L_kill`, sorted non-increasingly. A partial result
/// holds only the trailing (smallest) block of the spectrum.
#[derive(Debug, Clone)]
pub struct SvdResult {
    n: usize,
    sigma: Vec<f64>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    partial: bool,
}

impl SvdResult {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of held triplets.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn is_partial(&self) -> bool {
        self.partial
    }

    /// Held singular values, non-increasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    /// 1-based global index of the first held triplet.
    pub fn first_index(&self) -> usize {
        self.n * self.n - self.sigma.len() + 1
    }

    /// `σ̃_i` for global 1-based `i ∈ 1..=n²`, if held.
    pub fn sigma_at(&self, i: usize) -> Option<f64> {
        self.offset(i).map(|o| self.sigma[o])
    }

    /// `(σ̃_i, ũ_i, ṽ_i)` for global 1-based `i`, if held.
    pub fn triplet(&self, i: usize) -> Option<(f64, &[f64], &[f64])> {
        self.offset(i).map(|o| (self.sigma[o], self.u[o].as_slice(), self.v[o].as_slice()))
    }

    /// `σ̃_{n²}`.
    pub fn smallest(&self) -> f64 {
        *self.sigma.last().expect("an SVD result holds at least one triplet")
    }

    fn offset(&self, i: usize) -> Option<usize> {
        let first = self.first_index();
        (i >= first && i <= self.n * self.n).then(|| i - first)
    }

    /// `index,sigma` rows with global 1-based indices.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "sigma"])?;
        let first = self.first_index();
        for (o, s) in self.sigma.iter().enumerate() {
            w.write_record([(first + o).to_string(), format!("{s:?}")])?;
        }
        w.flush()?;
        Ok(())
    }

    fn push_normalised(&mut self, sigma: f64, mut u: Vec<f64>, mut v: Vec<f64>) {
        // sign convention: first nonzero coordinate of u positive
        if let Some(&lead) = u.iter().find(|x| x.abs() > 1e-12) {
            if lead < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        self.sigma.push(sigma);
        self.u.push(u);
        self.v.push(v);
    }
}

/// SVD of `L_kill`: all `n²` triplets from a dense factorisation when
/// `k_smallest` is `None`, otherwise the `k` smallest computed matrix-free.
pub fn svd_killed(p: &TransitionMatrix, k_smallest: Option<usize>) -> Result<SvdResult> {
    svd_killed_with(p, k_smallest, DEFAULT_DENSE_THRESHOLD, &SvdsOptions::default())
}

pub fn svd_killed_with(p: &TransitionMatrix, k_smallest: Option<usize>, dense_threshold: usize, opts: &SvdsOptions) -> Result<SvdResult> {
    let n = p.n();
    let op = PairOperator::killed(p);
    match k_smallest {
        None => {
            let dense = op.materialize_with_threshold(dense_threshold)?;
            Ok(dense_svd(n, dense))
        }
        Some(k) => {
            if k == 0 || k > n * n {
                return Err(Error::invalid(format!("k = {k} outside 1..={}", n * n)));
            }
            let trips = smallest_singular_triplets(&op, k, opts)?;
            let mut out = SvdResult { n, sigma: Vec::new(), u: Vec::new(), v: Vec::new(), partial: k < n * n };
            for t in trips {
                out.push_normalised(t.sigma, t.u, t.v);
            }
            Ok(out)
        }
    }
}

pub(crate) fn dense_svd(n: usize, a: DMatrix<f64>) -> SvdResult {
    let svd = crate::linalg::dense_svd(&a);
    let mut out = SvdResult { n, sigma: Vec::new(), u: Vec::new(), v: Vec::new(), partial: false };
    for (i, &sigma) in svd.sigma.iter().enumerate() {
        out.push_normalised(sigma, svd.u.column(i).iter().copied().collect(), svd.v.column(i).iter().copied().collect());
    }
    out
}

/// A singular value this small relative to the largest is treated as zero.
const ZERO_SIGMA_RTOL: f64 = 1e-12;

fn rank_one_term(sigma: f64, u: &[f64], v: &[f64], pipi: &[f64]) -> f64 {
    dot(pipi, v) * u.iter().sum::<f64>() / sigma
}

fn is_zero_sigma(sigma: f64, scale: f64) -> bool {
    sigma <= ZERO_SIGMA_RTOL * scale.max(1.0)
}

/// `−1 + Σ_i (1/σ̃_i)((π⊗π)ᵗṽ_i)(ũ_iᵗ1)` over the full spectrum.
pub fn spectral_tmeet(svd: &SvdResult, pi: &StationaryDistribution) -> Result<f64> {
    if svd.is_partial() {
        return Err(Error::InsufficientData(format!("spectral formula needs all {} triplets, {} held", svd.n * svd.n, svd.len())));
    }
    Error::check_len(svd.n, pi.len())?;
    let top = svd.sigma[0];
    if is_zero_sigma(svd.smallest(), top) {
        return Err(Error::InfiniteMeetingTime { condition: top / svd.smallest(), period: None });
    }
    let pipi = pi.kron_self();
    let sum: f64 = (0..svd.len()).rev().map(|o| rank_one_term(svd.sigma[o], &svd.u[o], &svd.v[o], &pipi)).sum();
    Ok(sum - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankKApprox {
    pub k: usize,
    pub value: f64,
    /// `n‖π‖²/σ̃_{n²−k}`; zero at `k = n²`, infinite when that value vanishes.
    pub bound: f64,
    pub certified: bool,
}

/// Truncation of the spectral formula to the `k` smallest triplets.
pub fn rank_k_tmeet(svd: &SvdResult, pi: &StationaryDistribution, k: usize) -> Result<RankKApprox> {
    let n = svd.n;
    let nn = n * n;
    Error::check_len(n, pi.len())?;
    if k == 0 || k > nn {
        return Err(Error::invalid(format!("k = {k} outside 1..={nn}")));
    }
    let needed = if k == nn { k } else { k + 1 };
    if svd.len() < needed {
        return Err(Error::InsufficientData(format!("rank-{k} approximation needs the {needed} smallest triplets, {} held", svd.len())));
    }
    let pipi = pi.kron_self();
    let scale = svd.sigma[0];
    let mut sum = 0.0;
    for i in (nn - k + 1..=nn).rev() {
        let (s, u, v) = svd.triplet(i).expect("held");
        if is_zero_sigma(s, scale) {
            return Err(Error::InfiniteMeetingTime { condition: scale / s, period: None });
        }
        sum += rank_one_term(s, u, v, &pipi);
    }
    let bound = if k == nn {
        0.0
    } else {
        let s = svd.sigma_at(nn - k).expect("held");
        if is_zero_sigma(s, scale) { f64::INFINITY } else { n as f64 * pi.sq_norm() / s }
    };
    Ok(RankKApprox { k, value: sum - 1.0, bound, certified: bound.is_finite() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{er_sample, ErParams, Graph};
    use crate::markov::{srw_from_graph, stationary};

    fn complete(n: usize) -> TransitionMatrix {
        srw_from_graph(&Graph::complete(n)).unwrap()
    }

    fn connected_er(n: usize, p: f64, mut seed: u64) -> TransitionMatrix {
        loop {
            let g = er_sample(&ErParams::from_p(n, p).unwrap(), seed);
            if g.is_connected() && g.isolated_vertex().is_none() {
                return srw_from_graph(&g).unwrap();
            }
            seed += 1000;
        }
    }

    #[test]
    fn complete_graph_meeting_times() {
        let m3 = exact_meeting_times(&complete(3)).unwrap();
        let m5 = exact_meeting_times(&complete(5)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 4.0 };
                assert!((m3.get(i, j) - want).abs() < 1e-12);
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 0.0 } else { 16.0 / 3.0 };
                assert!((m5.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn swap_chain_is_infinite_with_period() {
        match exact_meeting_times(&TransitionMatrix::swap2()) {
            Err(Error::InfiniteMeetingTime { period, .. }) => assert_eq!(period, Some(2)),
            other => panic!("expected infinite meeting time, got {other:?}"),
        }
    }

    #[test]
    fn even_cycle_is_infinite_but_lazy_cycle_is_not() {
        let c = srw_from_graph(&Graph::cycle(6).unwrap()).unwrap();
        assert!(matches!(exact_meeting_times(&c), Err(Error::InfiniteMeetingTime { period: Some(2), .. })));
        let m = exact_meeting_times(&c.lazy()).unwrap();
        assert!(m.get(0, 3) > 1.0);
    }

    #[test]
    fn tmeet_pi_examples() {
        let p3 = complete(3);
        let t3 = tmeet_pi(&exact_meeting_times(&p3).unwrap(), &stationary(&p3).unwrap()).unwrap();
        assert!((t3 - 8.0 / 3.0).abs() < 1e-12);
        let p5 = complete(5);
        let t5 = tmeet_pi(&exact_meeting_times(&p5).unwrap(), &stationary(&p5).unwrap()).unwrap();
        assert!((t5 - 64.0 / 15.0).abs() < 1e-12);
        let point = StationaryDistribution::from_probabilities(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(tmeet_pi(&exact_meeting_times(&p3).unwrap(), &point).unwrap(), 0.0);
    }

    #[test]
    fn solution_invariants() {
        let p = connected_er(12, 0.5, 7);
        let pi = stationary(&p).unwrap();
        let sol = solve_pair_system(&p, &SolveOptions::default()).unwrap();
        assert!((sol.diagonal_identity(&pi).unwrap() - 1.0).abs() < 1e-8);
        assert!(sol.recursion_residual(&p).unwrap() < 1e-8);
        let m = sol.meeting_times();
        assert!(m.max_asymmetry() < 1e-8);
        for i in 0..12 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..12 {
                if i != j {
                    assert!(m.get(i, j) >= 1.0);
                }
            }
        }
    }

    #[test]
    fn iterative_path_matches_dense_path() {
        let p = connected_er(15, 0.5, 11);
        let dense = solve_pair_system(&p, &SolveOptions::default()).unwrap();
        let iter = solve_pair_system(&p, &SolveOptions { dense_threshold: 0, ..Default::default() }).unwrap();
        for (a, b) in dense.as_slice().iter().zip(iter.as_slice()) {
            assert!((a - b).abs() <= 1e-8 * a.abs());
        }
        assert!((dense.condition() - iter.condition()).abs() <= 1e-6 * dense.condition());
    }

    #[test]
    fn spectral_formula_matches_exact() {
        for (p, want) in [(complete(3), 8.0 / 3.0), (complete(5), 64.0 / 15.0)] {
            let pi = stationary(&p).unwrap();
            let svd = svd_killed(&p, None).unwrap();
            assert!(svd.singular_values().windows(2).all(|w| w[0] >= w[1]));
            assert!((spectral_tmeet(&svd, &pi).unwrap() - want).abs() < 1e-8);
        }
    }

    #[test]
    fn swap_chain_has_zero_singular_value() {
        let p = TransitionMatrix::swap2();
        let svd = svd_killed(&p, None).unwrap();
        assert!(svd.sigma_at(4).unwrap() < 1e-12);
        let pi = stationary(&p).unwrap();
        assert!(matches!(spectral_tmeet(&svd, &pi), Err(Error::InfiniteMeetingTime { .. })));
    }

    #[test]
    fn partial_svd_agrees_with_dense() {
        let p = connected_er(10, 0.6, 3);
        let full = svd_killed(&p, None).unwrap();
        let part = svd_killed(&p, Some(2)).unwrap();
        assert!(part.is_partial());
        assert_eq!(part.first_index(), 99);
        for i in [99, 100] {
            assert!((full.sigma_at(i).unwrap() - part.sigma_at(i).unwrap()).abs() < 1e-8);
        }
        let pi = stationary(&p).unwrap();
        assert!(matches!(spectral_tmeet(&part, &pi), Err(Error::InsufficientData(_))));
        // rank-1 needs σ̃_{n²−1} as well
        assert!(rank_k_tmeet(&part, &pi, 1).is_ok());
        assert!(matches!(rank_k_tmeet(&part, &pi, 2), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn rank_k_bound_holds() {
        let p3 = complete(3);
        let pi = stationary(&p3).unwrap();
        let svd = svd_killed(&p3, None).unwrap();
        let full = rank_k_tmeet(&svd, &pi, 9).unwrap();
        assert_eq!(full.bound, 0.0);
        assert_eq!(full.value, spectral_tmeet(&svd, &pi).unwrap());
        let r1 = rank_k_tmeet(&svd, &pi, 1).unwrap();
        assert!(r1.certified);
        assert!((r1.value - 8.0 / 3.0).abs() <= r1.bound);

        for seed in 0..5 {
            let p = connected_er(8, 0.6, seed);
            let pi = stationary(&p).unwrap();
            let exact = tmeet_pi(&exact_meeting_times(&p).unwrap(), &pi).unwrap();
            let svd = svd_killed(&p, None).unwrap();
            for k in [1, 2, 4, 8] {
                let r = rank_k_tmeet(&svd, &pi, k).unwrap();
                assert!((r.value - exact).abs() <= r.bound, "seed {seed} k {k}");
            }
        }
    }

    #[test]
    fn singular_values_csv() {
        let svd = svd_killed(&complete(3), Some(2)).unwrap();
        let mut buf = Vec::new();
        svd.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,sigma");
        assert!(lines[1].starts_with("8,"));
        assert!(lines[2].starts_with("9,"));
    }
}
