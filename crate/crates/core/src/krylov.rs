// SPDX-License-Identifier: Apache-2.0

//! Restarted GMRES for nonsymmetric systems given only as a matrix-vector product.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale};

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Krylov dimension per cycle.
    pub restart: usize,
    /// Cap on the total number of inner iterations.
    pub max_iter: usize,
    /// Stop when `‖b − Ax‖ ≤ rel_tol · ‖b‖`.
    pub rel_tol: f64,
}

impl GmresOptions {
    pub fn new(max_iter: usize, rel_tol: f64) -> Self {
        Self { restart: 60, max_iter, rel_tol }
    }
}

#[derive(Debug, Clone)]
pub struct GmresSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solves `A x = b`. Convergence is always judged on the true residual
/// recomputed at the end of each cycle.
pub fn gmres<F>(apply: F, b: &[f64], x0: Option<&[f64]>, opts: &GmresOptions) -> Result<GmresSolution>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let (sol, converged) = gmres_best_effort(apply, b, x0, opts);
    if converged {
        Ok(sol)
    } else {
        Err(Error::Convergence { iterations: sol.iterations, residual: sol.rel_residual })
    }
}

/// Like [`gmres`] but always returns the last iterate, flagged with whether
/// the tolerance was met.
pub fn gmres_best_effort<F>(mut apply: F, b: &[f64], x0: Option<&[f64]>, opts: &GmresOptions) -> (GmresSolution, bool)
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let dim = b.len();
    let bnorm = norm(b);
    let mut x = x0.map_or_else(|| vec![0.0; dim], <[f64]>::to_vec);
    if bnorm == 0.0 {
        return (GmresSolution { x: vec![0.0; dim], iterations: 0, rel_residual: 0.0 }, true);
    }
    let target = opts.rel_tol * bnorm;
    let m = opts.restart.max(1).min(dim.max(1));

    let residual = |x: &[f64], apply: &mut F| -> Vec<f64> {
        let ax = apply(x);
        b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect()
    };

    let mut r = residual(&x, &mut apply);
    let mut rnorm = norm(&r);
    let mut iterations = 0;
    let mut stalled_cycles = 0;

    while rnorm > target {
        if iterations >= opts.max_iter {
            return (GmresSolution { x, iterations, rel_residual: rnorm / bnorm }, false);
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut v0 = r.clone();
        scale(1.0 / rnorm, &mut v0);
        basis.push(v0);

        // Hessenberg columns, reduced on the fly by Givens rotations.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = rnorm;
        let mut k = 0;

        while k < m && iterations < opts.max_iter {
            let mut w = apply(&basis[k]);
            let mut col = vec![0.0; k + 2];
            // Two passes of modified Gram–Schmidt.
            for _ in 0..2 {
                for (j, vj) in basis.iter().enumerate() {
                    let c = dot(&w, vj);
                    col[j] += c;
                    axpy(-c, vj, &mut w);
                }
            }
            let wn = norm(&w);
            col[k + 1] = wn;

            for (j, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (col[j], col[j + 1]);
                col[j] = c * a + s * bb;
                col[j + 1] = -s * a + c * bb;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let rho = a.hypot(bb);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, bb / rho) };
            col[k] = rho;
            col[k + 1] = 0.0;
            cs.push((c, s));
            g[k + 1] = -s * g[k];
            g[k] *= c;

            h.push(col);
            iterations += 1;
            k += 1;

            let breakdown = wn <= 1e-14 * rho.max(1.0);
            if !breakdown {
                scale(1.0 / wn, &mut w);
                basis.push(w);
            }
            if g[k].abs() <= 0.5 * target || breakdown {
                break;
            }
        }

        // Back substitution on the k × k triangle.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut x);
        }

        r = residual(&x, &mut apply);
        let new_norm = norm(&r);
        if new_norm > 0.999 * rnorm {
            stalled_cycles += 1;
            if stalled_cycles >= 3 {
                return (GmresSolution { x, iterations, rel_residual: new_norm / bnorm }, false);
            }
        } else {
            stalled_cycles = 0;
        }
        rnorm = new_norm;
    }
    (GmresSolution { x, iterations, rel_residual: rnorm / bnorm }, true)
}
