// SPDX-License-Identifier: Apache-2.0

//! The killed generator as a perturbation of the free pair generator.
//!
//! Write `K = (P⊗P)(E − I)`, so `L_kill = L − K`. The null pair of
//! `L = I − P⊗P` is known in closed form (`u = π⊗π/‖π‖²`, `v = 1/n`), and
//! Stewart's invariant-subspace theorem applied to `B = LᵗL`,
//! `Δ = L_killᵗL_kill − LᵗL` brackets `σ̃_{n²}²` around
//! `γ̃² = ‖L_kill v‖²`.
//!
//! No basis of the complement is ever formed. Quantities along `v` or `u`
//! are exact projections; the blocks living entirely on the complement
//! (`G22`, `Δ22`) are replaced by norm bounds through `‖G22‖ ≤ ‖K‖`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::eigs::EigOptions;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, project_out, LinearOperator};
use crate::markov::{StationaryDistribution, TransitionMatrix};
use crate::meeting::SvdResult;
use crate::pairspace::{PairMode, PairOperator, DEFAULT_DENSE_THRESHOLD};
use crate::spectral::{largest_singular_value, smallest_singular_triplets, RankOneUpdate, SvdsOptions};

/// Closed form vs numerical null pair must agree to this.
const NULL_PAIR_TOL: f64 = 1e-6;

/// SVD data of `L` needed by the perturbation bounds.
#[derive(Debug, Clone)]
pub struct UnperturbedSvd {
    n: usize,
    /// `σ_1(L) = ‖Σ2‖`.
    sigma_max: f64,
    /// `σ_{n²−1}(L) = σ_min(Σ2)`.
    sigma_sep: f64,
    u_last: Vec<f64>,
    v_last: Vec<f64>,
    dense: Option<DenseFactors>,
}

#[derive(Debug, Clone)]
struct DenseFactors {
    sigma: Vec<f64>,
    /// Columns `1..n²−1` of `U` and `V`, orthogonal to the closed-form pair.
    u2: DMatrix<f64>,
    v2: DMatrix<f64>,
}

fn closed_form_pair(pi: &StationaryDistribution) -> (Vec<f64>, Vec<f64>) {
    let n = pi.len();
    let mut u = pi.kron_self();
    let s = pi.sq_norm();
    u.iter_mut().for_each(|x| *x /= s);
    (u, vec![1.0 / n as f64; n * n])
}

fn check_null_pair(op: &PairOperator, u: &[f64], v: &[f64]) -> Result<()> {
    let rv = norm(&op.apply(v));
    let ru = norm(&op.apply_transpose(u));
    if rv > NULL_PAIR_TOL || ru > NULL_PAIR_TOL {
        return Err(Error::Inconsistency(format!(
            "closed-form null pair does not annihilate L (residuals {rv:e}, {ru:e})"
        )));
    }
    Ok(())
}

impl UnperturbedSvd {
    /// Full dense SVD of `L`; requires `n` within the dense threshold.
    pub fn dense(p: &TransitionMatrix, pi: &StationaryDistribution) -> Result<Self> {
        Error::check_len(p.n(), pi.len())?;
        let n = p.n();
        let op = PairOperator::new(p, PairMode::L);
        let (u_last, v_last) = closed_form_pair(pi);
        check_null_pair(&op, &u_last, &v_last)?;
        let svd = crate::meeting::dense_svd(n, op.materialize()?);
        let nn = n * n;
        let sigma: Vec<f64> = svd.singular_values().to_vec();
        if sigma[nn - 1] > NULL_PAIR_TOL {
            return Err(Error::Inconsistency(format!("smallest singular value of L is {:e}, not 0", sigma[nn - 1])));
        }
        // Replace the numerical null pair by the closed form and re-orthogonalise
        // the complement against it (matters only when the null space is larger).
        let mut u2 = DMatrix::zeros(nn, nn - 1);
        let mut v2 = DMatrix::zeros(nn, nn - 1);
        for i in 1..nn {
            let (_, u, v) = svd.triplet(i).expect("full SVD");
            let mut u = u.to_vec();
            let mut v = v.to_vec();
            project_out(&mut u, &unit(&u_last));
            project_out(&mut v, &unit(&v_last));
            u2.set_column(i - 1, &nalgebra::DVector::from_vec(u));
            v2.set_column(i - 1, &nalgebra::DVector::from_vec(v));
        }
        Ok(Self {
            n,
            sigma_max: sigma[0],
            sigma_sep: sigma[nn - 2],
            u_last: unit(&u_last),
            v_last: unit(&v_last),
            dense: Some(DenseFactors { sigma, u2, v2 }),
        })
    }

    /// Only the extreme values of `L`, computed matrix-free: `σ_1` by Lanczos
    /// on `LᵗL` and `σ_{n²−1}` as the smallest singular value of the
    /// deflated operator `L + c·u vᵗ` with `c ≥ σ_1`.
    pub fn matrix_free(p: &TransitionMatrix, pi: &StationaryDistribution) -> Result<Self> {
        Error::check_len(p.n(), pi.len())?;
        let n = p.n();
        let op = PairOperator::new(p, PairMode::L);
        let (u_raw, v_raw) = closed_form_pair(pi);
        check_null_pair(&op, &u_raw, &v_raw)?;
        let u_last = unit(&u_raw);
        let v_last = unit(&v_raw);
        let sigma_max = largest_singular_value(&op, &EigOptions { tol: 1e-10, ..Default::default() })?;
        let c = sigma_max.max(1.0) * 2.0;
        let deflated = RankOneUpdate { base: &op, c, u: &u_last, v: &v_last };
        let sigma_sep = if n == 1 {
            0.0
        } else {
            smallest_singular_triplets(&deflated, 1, &SvdsOptions::default())?[0].sigma
        };
        Ok(Self { n, sigma_max, sigma_sep, u_last, v_last, dense: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// All singular values of `L` (dense mode only), non-increasing.
    pub fn singular_values(&self) -> Option<&[f64]> {
        self.dense.as_ref().map(|d| d.sigma.as_slice())
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// `σ_min(Σ2)`.
    pub fn sigma_sep(&self) -> f64 {
        self.sigma_sep
    }

    pub fn u_last(&self) -> &[f64] {
        &self.u_last
    }

    pub fn v_last(&self) -> &[f64] {
        &self.v_last
    }
}

fn unit(x: &[f64]) -> Vec<f64> {
    let s = norm(x);
    x.iter().map(|v| v / s).collect()
}

/// Dense unperturbed SVD within the threshold, extremes only above it.
pub fn unperturbed_svd(p: &TransitionMatrix, pi: &StationaryDistribution) -> Result<UnperturbedSvd> {
    if p.n() <= DEFAULT_DENSE_THRESHOLD {
        UnperturbedSvd::dense(p, pi)
    } else {
        UnperturbedSvd::matrix_free(p, pi)
    }
}

/// `u_lastᵗ K v_last`; equals `−1/n` for every stochastic `P` with invariant `π`.
pub fn gamma11(p: &TransitionMatrix, pi: &StationaryDistribution) -> Result<f64> {
    Error::check_len(p.n(), pi.len())?;
    let n = p.n();
    let k = PairOperator::new(p, PairMode::Perturbation);
    let y = k.apply(&vec![1.0; n * n]);
    Ok(dot(&pi.kron_self(), &y) / (pi.sq_norm() * n as f64))
}

/// `γ̃11² = ‖K 1‖²/n²`.
pub fn tilde_gamma11_sq(p: &TransitionMatrix) -> f64 {
    let n = p.n();
    let k = PairOperator::new(p, PairMode::Perturbation);
    let y = k.apply(&vec![1.0; n * n]);
    dot(&y, &y) / (n * n) as f64
}

/// `‖K‖₂` by Lanczos on `KᵗK` (tolerance 1e−8 on the Ritz residual).
pub fn perturbation_norm(p: &TransitionMatrix) -> Result<f64> {
    let k = PairOperator::new(p, PairMode::Perturbation);
    largest_singular_value(&k, &EigOptions { tol: 1e-8, ..Default::default() })
}

/// `‖K‖₂` from the `n × n` Gram form: `KᵗK` is supported on `D`, where it
/// equals the Hadamard square of `PᵗP`.
pub fn perturbation_norm_gram(p: &TransitionMatrix) -> f64 {
    let g = p.transpose() * p.matrix();
    let h = g.component_mul(&g);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(0.0, f64::max).sqrt()
}

/// Block norms of the Stewart decomposition. Fields ending in `_bound` are
/// upper bounds, the rest are exact up to rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StewartBlocks {
    pub n: usize,
    pub gamma11: f64,
    pub g12_norm: f64,
    pub g21_norm: f64,
    pub g22_norm_bound: f64,
    pub perturbation_norm: f64,
    pub sigma2_norm: f64,
    /// `‖Σ2⁻²‖⁻¹ = σ_min(Σ2)²`.
    pub sep: f64,
    pub tilde_gamma11_sq: f64,
    pub delta11: f64,
    pub delta12_norm: f64,
    pub delta21_norm: f64,
    pub delta22_norm_bound: f64,
    pub delta: f64,
    pub condition_value: f64,
    /// `‖(I − uuᵗ)(L_kill L_killᵗ − LLᵗ)u‖`, the left-vector analogue of `‖Δ12‖`.
    pub w_numerator: f64,
    pub delta_w: f64,
    /// `‖π‖²`.
    pub pi_sq_norm: f64,
}

pub fn stewart_blocks(p: &TransitionMatrix, pi: &StationaryDistribution, svd: &UnperturbedSvd) -> Result<StewartBlocks> {
    let n = p.n();
    Error::check_len(n, pi.len())?;
    Error::check_len(n, svd.n)?;
    let u = &svd.u_last;
    let v = &svd.v_last;
    let k = PairOperator::new(p, PairMode::Perturbation);
    let lk = PairOperator::killed(p);

    let mut y = k.apply(v);
    let gamma11 = dot(u, &y);
    let tilde_gamma11_sq = dot(&y, &y);
    project_out(&mut y, u);
    let g21_norm = norm(&y);

    let mut z = k.apply_transpose(u);
    project_out(&mut z, v);
    let g12_norm = norm(&z);

    // Δ v = L_killᵗ L_kill v because L v = 0; Δ is symmetric so Δ21 = Δ12ᵗ.
    let mut dv = lk.apply_transpose(&lk.apply(v));
    let delta11 = dot(v, &dv);
    project_out(&mut dv, v);
    let delta12_norm = norm(&dv);

    let mut du = lk.apply(&lk.apply_transpose(u));
    project_out(&mut du, u);
    let w_numerator = norm(&du);

    let knorm = perturbation_norm(p)?;
    let sigma2_norm = svd.sigma_max;
    let sep = svd.sigma_sep * svd.sigma_sep;
    let cross = 2.0 * knorm * sigma2_norm + knorm * knorm;
    let delta22_norm_bound = cross + g12_norm * g12_norm;
    let delta = sep - delta11 - delta22_norm_bound;
    let condition_value = if delta > 0.0 { 4.0 * delta12_norm * delta12_norm / (delta * delta) } else { f64::INFINITY };
    let delta_w = sep - gamma11 * gamma11 - g12_norm * g12_norm - (cross + g21_norm * g21_norm);

    Ok(StewartBlocks {
        n,
        gamma11,
        g12_norm,
        g21_norm,
        g22_norm_bound: knorm,
        perturbation_norm: knorm,
        sigma2_norm,
        sep,
        tilde_gamma11_sq,
        delta11,
        delta12_norm,
        delta21_norm: delta12_norm,
        delta22_norm_bound,
        delta,
        condition_value,
        w_numerator,
        delta_w,
        pi_sq_norm: pi.sq_norm(),
    })
}

/// Exact blocks `γ11, g12, g21, G22` from the dense factors, for cross-checks.
#[derive(Debug, Clone)]
pub struct DenseBlocks {
    pub gamma11: f64,
    pub g12: Vec<f64>,
    pub g21: Vec<f64>,
    pub g22_norm: f64,
}

impl UnperturbedSvd {
    pub fn dense_blocks(&self, p: &TransitionMatrix) -> Option<DenseBlocks> {
        let f = self.dense.as_ref()?;
        let k = PairOperator::new(p, PairMode::Perturbation).materialize().ok()?;
        let u = nalgebra::DVector::from_column_slice(&self.u_last);
        let v = nalgebra::DVector::from_column_slice(&self.v_last);
        let kv = &k * &v;
        let ktu = k.tr_mul(&u);
        let g22 = f.u2.tr_mul(&k) * &f.v2;
        Some(DenseBlocks {
            gamma11: u.dot(&kv),
            g12: f.v2.tr_mul(&ktu).iter().copied().collect(),
            g21: f.u2.tr_mul(&kv).iter().copied().collect(),
            g22_norm: crate::linalg::spectral_norm(&g22),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaBounds {
    pub lower_sq: f64,
    pub upper_sq: f64,
    pub certified: bool,
    pub q_norm_bound: f64,
    pub w_norm_bound: f64,
}

/// `σ̃_{n²}² ∈ [γ̃² − 2‖Δ12‖²/δ, γ̃² + 2‖Δ12‖²/δ]`, valid when `certified`.
/// With `δ ≤ 0` the interval is vacuous: `[0, ∞)`.
pub fn sigma_min_bounds(blocks: &StewartBlocks) -> SigmaBounds {
    let w_norm_bound = if blocks.delta_w > 0.0 { 2.0 * blocks.w_numerator / blocks.delta_w } else { f64::INFINITY };
    if !(blocks.delta > 0.0) {
        return SigmaBounds { lower_sq: 0.0, upper_sq: f64::INFINITY, certified: false, q_norm_bound: f64::INFINITY, w_norm_bound };
    }
    let spread = 2.0 * blocks.delta12_norm * blocks.delta12_norm / blocks.delta;
    SigmaBounds {
        lower_sq: (blocks.tilde_gamma11_sq - spread).max(0.0),
        upper_sq: blocks.tilde_gamma11_sq + spread,
        certified: blocks.condition_value <= 1.0,
        q_norm_bound: 2.0 * blocks.delta21_norm / blocks.delta,
        w_norm_bound,
    }
}

/// Two-sided bracket on `‖K‖²` in terms of the degree and
/// codegree deviations. `None` unless `R1 < 1` and `R2 ≤ 1`.
pub fn perturbation_norm_sq_bounds(n: usize, d: f64, r1: f64, r2: f64) -> Option<(f64, f64)> {
    if !(r1 < 1.0 && r2 <= 1.0) || n == 0 || !(d > 0.0) {
        return None;
    }
    let nf = n as f64;
    let lo4 = (1.0 + r1).powi(4);
    let hi4 = (1.0 - r1).powi(4);
    let upper = (1.0 + r1).powi(2) / (d * d * hi4) + (1.0 + r2).powi(2) / (nf * hi4) - (1.0 + r2).powi(2) / (nf * nf * hi4);
    let lower = (1.0 - r1).powi(2) / (d * d * lo4) + (1.0 - r2).powi(2) / (nf * lo4) - (1.0 - r2).powi(2) / (nf * nf * lo4);
    Some((lower, upper))
}

/// `ν = ((ε1+1)^{1/4} − 1)/((ε1+1)^{1/4} + 1)`, used for both degree and codegree.
pub fn nu_from_eps(eps1: f64) -> Result<(f64, f64)> {
    if !(eps1 > 0.0) || !eps1.is_finite() {
        return Err(Error::invalid(format!("epsilon1 must be positive, got {eps1}")));
    }
    let r = (eps1 + 1.0).powf(0.25);
    let nu = (r - 1.0) / (r + 1.0);
    Ok((nu, nu))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormEstimateReport {
    pub eps1: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub checks: Vec<InequalityCheck>,
}

impl NormEstimateReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Evaluates the finite-`n` norm estimates at tolerance `ε1`.
pub fn norm_estimate_report(blocks: &StewartBlocks, eps1: f64) -> Result<NormEstimateReport> {
    let (nu1, nu2) = nu_from_eps(eps1)?;
    let nf = blocks.n as f64;
    let up = |name, measured: f64, bound: f64| InequalityCheck { name, measured, bound, pass: measured <= bound };
    let down = |name, measured: f64, bound: f64| InequalityCheck { name, measured, bound, pass: measured >= bound };
    let checks = vec![
        up("sigma2_norm", blocks.sigma2_norm, 2.0 + eps1),
        up("n_g12_sq", nf * blocks.g12_norm.powi(2), 1.0 + eps1),
        up("n_pi_sq", nf * blocks.pi_sq_norm, 1.0 + eps1),
        up("sqrt_n_g22_bound", nf.sqrt() * blocks.g22_norm_bound, 1.0 + eps1),
        up("n2_g21_sq", nf * nf * blocks.g21_norm.powi(2), (1.0 + eps1).powi(2) - 1.0),
        down("sep_lower", blocks.sep, (1.0 - eps1).powi(2)),
        up("sep_upper", blocks.sep, (1.0 + eps1).powi(2)),
    ];
    Ok(NormEstimateReport { eps1, nu1, nu2, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveredRotation {
    /// `tan ∠(ṽ_{n²}, v_last)`.
    pub q_norm: f64,
    /// `tan ∠(ũ_{n²}, u_last)`.
    pub w_norm: f64,
}

fn tan_angle(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = unit(a);
    let b = unit(b);
    let c = dot(&a, &b);
    if c.abs() < 1e-12 {
        return Err(Error::RecoveryFailure);
    }
    // sine from the orthogonal component; 1 − c² cancels catastrophically
    let mut perp = a;
    project_out(&mut perp, &b);
    Ok(norm(&perp) / c.abs())
}

/// Recovers `‖Q‖` and `‖W‖` from the least perturbed singular vectors.
pub fn recover_q(unpert: &UnperturbedSvd, killed: &SvdResult) -> Result<RecoveredRotation> {
    let nn = unpert.n * unpert.n;
    Error::check_len(unpert.n, killed.n())?;
    let (_, u, v) = killed
        .triplet(nn)
        .ok_or_else(|| Error::InsufficientData("least singular triplet of L_kill not held".into()))?;
    Ok(RecoveredRotation { q_norm: tan_angle(v, &unpert.v_last)?, w_norm: tan_angle(u, &unpert.u_last)? })
}

/// Everything the perturbation analysis says about one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub blocks: StewartBlocks,
    pub bounds: SigmaBounds,
    /// `σ̃_{n²}²` when an SVD of `L_kill` was supplied.
    pub sigma_min_sq: Option<f64>,
    pub in_sandwich: Option<bool>,
    pub rotation: Option<RecoveredRotation>,
    pub norm_estimates: Option<NormEstimateReport>,
}

impl PerturbationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn perturbation_report(
    p: &TransitionMatrix,
    pi: &StationaryDistribution,
    killed: Option<&SvdResult>,
    eps1: Option<f64>,
) -> Result<PerturbationReport> {
    let unpert = unperturbed_svd(p, pi)?;
    let blocks = stewart_blocks(p, pi, &unpert)?;
    let bounds = sigma_min_bounds(&blocks);
    let least = killed.and_then(|s| s.sigma_at(s.n() * s.n()));
    let sigma_min_sq = least.map(|s| s * s);
    let in_sandwich = sigma_min_sq.map(|s| s >= bounds.lower_sq && s <= bounds.upper_sq);
    let rotation = match killed {
        Some(s) => recover_q(&unpert, s).ok(),
        None => None,
    };
    let norm_estimates = eps1.map(|e| norm_estimate_report(&blocks, e)).transpose()?;
    Ok(PerturbationReport { blocks, bounds, sigma_min_sq, in_sandwich, rotation, norm_estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{er_sample, ErParams, Graph};
    use crate::markov::{srw_from_graph, stationary};
    use crate::meeting::svd_killed;

    fn connected_er(n: usize, p: f64, mut seed: u64) -> TransitionMatrix {
        loop {
            let g = er_sample(&ErParams::from_p(n, p).unwrap(), seed);
            if g.is_connected() {
                return srw_from_graph(&g).unwrap();
            }
            seed += 1000;
        }
    }

    #[test]
    fn gamma11_is_minus_one_over_n() {
        for n in [3usize, 7, 10] {
            let p = connected_er(n, 0.6, n as u64);
            let pi = stationary(&p).unwrap();
            assert!((gamma11(&p, &pi).unwrap() + 1.0 / n as f64).abs() < 1e-12);
            let svd = UnperturbedSvd::dense(&p, &pi).unwrap();
            let b = svd.dense_blocks(&p).unwrap();
            assert!((b.gamma11 + 1.0 / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn unperturbed_null_pair() {
        let p = srw_from_graph(&Graph::complete(3)).unwrap();
        let pi = stationary(&p).unwrap();
        let svd = UnperturbedSvd::dense(&p, &pi).unwrap();
        assert!(svd.singular_values().unwrap()[8] < 1e-12);
        for x in svd.u_last() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p4 = connected_er(4, 0.8, 1);
        let pi4 = stationary(&p4).unwrap();
        let s4 = UnperturbedSvd::dense(&p4, &pi4).unwrap();
        let op = PairOperator::new(&p4, PairMode::L);
        assert!(norm(&op.apply(s4.v_last())) < 1e-10);
        assert!(norm(&op.apply_transpose(s4.u_last())) < 1e-10);
    }

    #[test]
    fn block_routes_agree() {
        for seed in 0..4 {
            let p = connected_er(9, 0.6, seed);
            let pi = stationary(&p).unwrap();
            let svd = UnperturbedSvd::dense(&p, &pi).unwrap();
            let blocks = stewart_blocks(&p, &pi, &svd).unwrap();
            let dense = svd.dense_blocks(&p).unwrap();
            let g21 = norm(&dense.g21);
            let g12 = norm(&dense.g12);
            assert!((blocks.g21_norm - g21).abs() < 1e-10, "{} vs {g21}", blocks.g21_norm);
            assert!((blocks.g12_norm - g12).abs() < 1e-10);
            assert!((tilde_gamma11_sq(&p) - (dense.gamma11.powi(2) + g21 * g21)).abs() < 1e-10);
            assert!((blocks.tilde_gamma11_sq - tilde_gamma11_sq(&p)).abs() < 1e-12);
            assert!(dense.g22_norm <= blocks.g22_norm_bound + 1e-12);
            assert!(tilde_gamma11_sq(&p) * 81.0 >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn g12_matches_degree_formula() {
        for seed in 0..3 {
            let g = loop {
                let g = er_sample(&ErParams::from_p(12, 0.5).unwrap(), 50 + seed);
                if g.is_connected() {
                    break g;
                }
            };
            let p = srw_from_graph(&g).unwrap();
            let pi = stationary(&p).unwrap();
            let blocks = stewart_blocks(&p, &pi, &UnperturbedSvd::dense(&p, &pi).unwrap()).unwrap();
            let deg: Vec<f64> = g.degrees().iter().map(|&d| d as f64).collect();
            let s4: f64 = deg.iter().map(|d| d.powi(4)).sum();
            let s2: f64 = deg.iter().map(|d| d * d).sum();
            let n = 12.0;
            let want = n * s4 / (s2 * s2) - 1.0 / n;
            assert!((n * blocks.g12_norm.powi(2) - want).abs() < 1e-10);
        }
        let kn = srw_from_graph(&Graph::complete(6)).unwrap();
        let pi = stationary(&kn).unwrap();
        let b = stewart_blocks(&kn, &pi, &UnperturbedSvd::dense(&kn, &pi).unwrap()).unwrap();
        assert!((6.0 * b.g12_norm.powi(2) - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn sep_matches_dense_and_matrix_free() {
        let p = connected_er(8, 0.7, 2);
        let pi = stationary(&p).unwrap();
        let dense = UnperturbedSvd::dense(&p, &pi).unwrap();
        let free = UnperturbedSvd::matrix_free(&p, &pi).unwrap();
        let sv = dense.singular_values().unwrap();
        assert!((dense.sigma_sep() - sv[62]).abs() < 1e-14);
        assert!((free.sigma_sep() - dense.sigma_sep()).abs() < 1e-9);
        assert!((free.sigma_max() - dense.sigma_max()).abs() < 1e-9);
    }

    #[test]
    fn perturbation_norm_routes() {
        let p = connected_er(10, 0.5, 4);
        assert!((perturbation_norm(&p).unwrap() - perturbation_norm_gram(&p)).abs() < 1e-7);
        let dense = PairOperator::new(&p, PairMode::Perturbation).materialize().unwrap();
        let top = dense.singular_values().iter().copied().fold(0.0, f64::max);
        assert!((perturbation_norm_gram(&p) - top).abs() < 1e-12);
        let id = TransitionMatrix::new(DMatrix::identity(2, 2)).unwrap();
        assert!((perturbation_norm(&id).unwrap() - 1.0).abs() < 1e-8);
        assert!((perturbation_norm_gram(&id) - 1.0).abs() < 1e-15);
        for n in [10usize, 20, 40] {
            let kn = srw_from_graph(&Graph::complete(n)).unwrap();
            let ratio = perturbation_norm_gram(&kn).powi(2) * n as f64;
            assert!((0.5..=2.0).contains(&ratio));
        }
    }

    #[test]
    fn swap_chain_is_uncertified() {
        let p = TransitionMatrix::swap2();
        let pi = stationary(&p).unwrap();
        let svd = UnperturbedSvd::dense(&p, &pi).unwrap();
        let blocks = stewart_blocks(&p, &pi, &svd).unwrap();
        let b = sigma_min_bounds(&blocks);
        assert!(!b.certified);
        assert_eq!(b.lower_sq, 0.0);
    }

    #[test]
    fn sandwich_contains_least_singular_value() {
        let p = connected_er(30, 0.7, 9);
        let pi = stationary(&p).unwrap();
        let killed = svd_killed(&p, Some(1)).unwrap();
        let report = perturbation_report(&p, &pi, Some(&killed), Some(0.5)).unwrap();
        assert!(report.bounds.certified, "{report:?}");
        assert_eq!(report.in_sandwich, Some(true));
        let rot = report.rotation.unwrap();
        assert!(rot.q_norm <= report.bounds.q_norm_bound);
        let json = report.to_json().unwrap();
        assert!(json.contains("\"condition_value\""));
    }

    #[test]
    fn nu_examples() {
        let (a, b) = nu_from_eps(15.0).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-15 && a == b);
        assert!(nu_from_eps(1e-12).unwrap().0 < 1e-12);
        assert!(nu_from_eps(0.05).unwrap().0 < nu_from_eps(0.5).unwrap().0);
        assert!(nu_from_eps(0.0).is_err());
        assert!(nu_from_eps(-1.0).is_err());
    }

    #[test]
    fn norm_estimates_on_complete_graph() {
        let p = srw_from_graph(&Graph::complete(12)).unwrap();
        let pi = stationary(&p).unwrap();
        let blocks = stewart_blocks(&p, &pi, &UnperturbedSvd::dense(&p, &pi).unwrap()).unwrap();
        let r = norm_estimate_report(&blocks, 0.01).unwrap();
        let pi_check = r.checks.iter().find(|c| c.name == "n_pi_sq").unwrap();
        assert!((pi_check.measured - 1.0).abs() < 1e-12 && pi_check.pass);
        assert_eq!(r.checks.len(), 7);
    }

    #[test]
    fn zero_perturbation_recovers_zero_rotation() {
        let p = connected_er(6, 0.7, 3);
        let pi = stationary(&p).unwrap();
        let unpert = UnperturbedSvd::dense(&p, &pi).unwrap();
        // with E replaced by I the killed operator is L itself
        let l = PairOperator::new(&p, PairMode::L).materialize().unwrap();
        let svd = crate::meeting::dense_svd(6, l);
        let rot = recover_q(&unpert, &svd);
        // the numerical null vectors of L are the closed-form pair
        let rot = rot.unwrap();
        assert!(rot.q_norm < 1e-8 && rot.w_norm < 1e-8, "{rot:?} {:?}", &svd.singular_values()[30..]);
    }

    #[test]
    fn degree_bounds_bracket_norm() {
        let g = er_sample(&ErParams::from_p(50, 0.5).unwrap(), 5);
        let p = srw_from_graph(&g).unwrap();
        let d = 25.0;
        let r1 = crate::graphs::degree_stats(&g, d).unwrap().r1;
        let r2 = crate::graphs::codegree_stats(&g, d).unwrap().r2;
        let (lo, hi) = perturbation_norm_sq_bounds(50, d, r1, r2).unwrap();
        let k2 = perturbation_norm_gram(&p).powi(2);
        assert!(lo <= k2 && k2 <= hi, "{lo} {k2} {hi}");
    }
}
