// SPDX-License-Identifier: Apache-2.0

//! Largest eigenpairs of a symmetric positive semidefinite operator by
//! thick-restart Lanczos (the symmetric Krylov–Schur scheme) with full
//! reorthogonalisation.
//!
//! The projected matrix is kept in general form `A V = V T + v_{m+1} bᵗ`,
//! so restarts only need the Ritz decomposition of `T`. The residual of Ritz
//! pair `(θ, V y)` is `|bᵗ y|`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale};

#[derive(Debug, Clone, Copy)]
pub struct EigOptions {
    /// Maximum basis size before a restart.
    pub max_basis: usize,
    /// Ritz pair accepted when its residual is `≤ tol · |θ|`.
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self { max_basis: 40, tol: 1e-12, max_restarts: 200, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

/// The `k` algebraically largest eigenpairs, sorted by decreasing eigenvalue.
pub fn largest_eigenpairs<F>(dim: usize, k: usize, mut apply: F, opts: &EigOptions) -> Result<Vec<EigPair>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if k == 0 || k > dim {
        return Err(Error::invalid(format!("requested {k} eigenpairs of a {dim}-dimensional operator")));
    }
    let m = opts.max_basis.max(2 * k + 2).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let s = norm(&start);
    scale(1.0 / s, &mut start);

    let mut basis: Vec<Vec<f64>> = vec![start];
    // t[(i, j)] for the current basis; row `basis.len() − 1` doubles as bᵗ.
    let mut t = DMatrix::<f64>::zeros(m + 1, m);
    let mut kept = 0usize;
    let mut last_residual = f64::INFINITY;

    for _restart in 0..=opts.max_restarts {
        let mut size = kept;
        let mut invariant = false;
        while size < m {
            let mut w = apply(&basis[size])?;
            for _ in 0..2 {
                for (j, vj) in basis.iter().enumerate() {
                    let c = dot(&w, vj);
                    t[(j, size)] += c;
                    axpy(-c, vj, &mut w);
                }
            }
            let beta = norm(&w);
            size += 1;
            let scale_ref = t.view((0, 0), (size, size)).amax().max(f64::MIN_POSITIVE);
            if beta <= 1e-13 * scale_ref || size == dim {
                t[(size, size - 1)] = 0.0;
                invariant = true;
                break;
            }
            t[(size, size - 1)] = beta;
            scale(1.0 / beta, &mut w);
            basis.push(w);
        }

        let tm = t.view((0, 0), (size, size)).clone_owned();
        let tm = (&tm + tm.transpose()) * 0.5;
        let eig = SymmetricEigen::new(tm);
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let brow = t.view((size, 0), (1, size)).clone_owned();

        let residual_of = |idx: usize| -> f64 {
            if invariant {
                0.0
            } else {
                (&brow * eig.eigenvectors.column(idx))[(0, 0)].abs()
            }
        };
        let converged = order.iter().take(k).all(|&i| residual_of(i) <= opts.tol * eig.eigenvalues[i].abs().max(f64::MIN_POSITIVE));
        last_residual = order.iter().take(k).map(|&i| residual_of(i)).fold(0.0, f64::max);

        let ritz_vector = |idx: usize| -> Vec<f64> {
            let mut v = vec![0.0; dim];
            for (j, vj) in basis.iter().take(size).enumerate() {
                axpy(eig.eigenvectors[(j, idx)], vj, &mut v);
            }
            v
        };

        if converged || invariant {
            return Ok(order
                .iter()
                .take(k)
                .map(|&i| EigPair { value: eig.eigenvalues[i], vector: ritz_vector(i), residual: residual_of(i) })
                .collect());
        }

        // Thick restart: keep the leading Ritz vectors plus the residual direction.
        let keep = (k + (m - k) / 2).min(size - 1).max(k);
        let next = basis[size].clone();
        let mut new_basis: Vec<Vec<f64>> = order.iter().take(keep).map(|&i| ritz_vector(i)).collect();
        new_basis.push(next);
        let mut new_t = DMatrix::<f64>::zeros(m + 1, m);
        for (a, &i) in order.iter().take(keep).enumerate() {
            new_t[(a, a)] = eig.eigenvalues[i];
            let b = (&brow * eig.eigenvectors.column(i))[(0, 0)];
            new_t[(keep, a)] = b;
        }
        basis = new_basis;
        t = new_t;
        kept = keep;
    }
    Err(Error::Convergence { iterations: opts.max_restarts, residual: last_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::LinearOperator;

    fn spd(n: usize) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| (((i * 13 + j * 7) % 17) as f64 - 8.0) / 9.0);
        b.transpose() * b + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn matches_dense_eigensolver() {
        let a = spd(60);
        let mut dense: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
        dense.sort_by(|x, y| y.total_cmp(x));
        let opts = EigOptions { max_basis: 20, ..Default::default() };
        let pairs = largest_eigenpairs(60, 4, |x| Ok(a.apply(x)), &opts).unwrap();
        for (p, d) in pairs.iter().zip(&dense) {
            assert!((p.value - d).abs() < 1e-9 * d, "{} vs {}", p.value, d);
            let av = a.apply(&p.vector);
            let res: f64 = av.iter().zip(&p.vector).map(|(x, v)| (x - p.value * v).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-8 * d);
        }
    }

    #[test]
    fn tiny_dimension_hits_invariant_subspace() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let pairs = largest_eigenpairs(2, 2, |x| Ok(a.apply(x)), &EigOptions::default()).unwrap();
        assert!((pairs[0].value - 3.0).abs() < 1e-13);
        assert!((pairs[1].value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_k() {
        assert!(largest_eigenpairs(3, 4, |x| Ok(x.to_vec()), &EigOptions::default()).is_err());
    }
}
