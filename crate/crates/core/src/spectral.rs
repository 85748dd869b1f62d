// SPDX-License-Identifier: Apache-2.0

//! Matrix-free extreme singular triplets.
//!
//! The smallest triplets of `A` come from the largest eigenpairs of
//! `(AᵗA)⁻¹ = A⁻¹A⁻ᵗ`, each application costing one GMRES solve with `Aᵗ`
//! and one with `A`. The largest singular value comes from Lanczos on `AᵗA`.

use crate::eigs::{largest_eigenpairs, EigOptions};
use crate::error::{Error, Result};
use crate::krylov::{gmres_best_effort, GmresOptions};
use crate::linalg::{dot, norm, LinearOperator};

/// Residual threshold every returned triplet must meet.
pub const TRIPLET_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SingularTriplet {
    /// `max(‖A v − σ u‖, ‖Aᵗ u − σ v‖)`.
    pub fn residual(&self, op: &dyn LinearOperator) -> f64 {
        let av = op.apply(&self.v);
        let atu = op.apply_transpose(&self.u);
        let r1 = av.iter().zip(&self.u).map(|(a, u)| (a - self.sigma * u).powi(2)).sum::<f64>().sqrt();
        let r2 = atu.iter().zip(&self.v).map(|(a, v)| (a - self.sigma * v).powi(2)).sum::<f64>().sqrt();
        r1.max(r2)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SvdsOptions {
    pub eig: EigOptions,
    pub inner: GmresOptions,
    /// Inner solves whose residual stays above this are treated as failures.
    pub inner_fail_tol: f64,
}

impl Default for SvdsOptions {
    fn default() -> Self {
        Self {
            eig: EigOptions { max_basis: 30, tol: 1e-13, max_restarts: 100, seed: 0x5eed },
            inner: GmresOptions { restart: 80, max_iter: 20_000, rel_tol: 1e-14 },
            inner_fail_tol: 1e-10,
        }
    }
}

/// The `k` smallest singular triplets of an invertible operator, returned in
/// non-increasing order of σ (so the last element is the smallest).
pub fn smallest_singular_triplets(op: &dyn LinearOperator, k: usize, opts: &SvdsOptions) -> Result<Vec<SingularTriplet>> {
    let dim = op.dim();
    let solve = |rhs: &[f64], transpose: bool| -> Result<Vec<f64>> {
        let (sol, ok) = if transpose {
            gmres_best_effort(|x| op.apply_transpose(x), rhs, None, &opts.inner)
        } else {
            gmres_best_effort(|x| op.apply(x), rhs, None, &opts.inner)
        };
        if !ok && !(sol.rel_residual <= opts.inner_fail_tol) {
            return Err(Error::Convergence { iterations: sol.iterations, residual: sol.rel_residual });
        }
        Ok(sol.x)
    };
    let pairs = largest_eigenpairs(
        dim,
        k,
        |x| {
            let y = solve(x, true)?;
            solve(&y, false)
        },
        &opts.eig,
    )?;

    let mut out = Vec::with_capacity(k);
    for pair in pairs {
        let v = pair.vector;
        let mut u = op.apply(&v);
        let sigma = norm(&u);
        if sigma == 0.0 {
            return Err(Error::Inconsistency("operator annihilates a Ritz vector".into()));
        }
        u.iter_mut().for_each(|x| *x /= sigma);
        let t = SingularTriplet { sigma, u, v };
        let res = t.residual(op);
        if !(res <= TRIPLET_TOL) {
            return Err(Error::Convergence { iterations: opts.eig.max_restarts, residual: res });
        }
        out.push(t);
    }
    // eigenvalues of the inverse decrease, so σ increases; flip to non-increasing
    out.reverse();
    Ok(out)
}

/// `‖A‖₂` by Lanczos on `AᵗA`.
pub fn largest_singular_value(op: &dyn LinearOperator, opts: &EigOptions) -> Result<f64> {
    let pairs = largest_eigenpairs(op.dim(), 1, |x| Ok(op.apply_transpose(&op.apply(x))), opts)?;
    Ok(pairs[0].value.max(0.0).sqrt())
}

/// `A + c·u vᵗ` for unit vectors `u`, `v`.
pub struct RankOneUpdate<'a> {
    pub base: &'a dyn LinearOperator,
    pub c: f64,
    pub u: &'a [f64],
    pub v: &'a [f64],
}

impl LinearOperator for RankOneUpdate<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.base.apply(x);
        let s = self.c * dot(self.v, x);
        y.iter_mut().zip(self.u).for_each(|(yi, ui)| *yi += s * ui);
        y
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.base.apply_transpose(x);
        let s = self.c * dot(self.u, x);
        y.iter_mut().zip(self.v).for_each(|(yi, vi)| *yi += s * vi);
        y
    }
}
