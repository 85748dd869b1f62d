// SPDX-License-Identifier: Apache-2.0

//! Strategies and property checks shared by the property and acceptance targets.

#![allow(dead_code)]

use meetsvd_core::pairspace::apply_e;
use meetsvd_core::{LinearOperator, PairMode, PairOperator, TransitionMatrix};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const MODES: [PairMode; 4] = [PairMode::L, PairMode::LKill, PairMode::Kron, PairMode::Perturbation];

/// Strictly positive rows, so the chain is irreducible and aperiodic.
pub fn chain(max_n: usize) -> impl Strategy<Value = TransitionMatrix> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(0.05f64..1.0, n * n).prop_map(move |w| {
            let rows: Vec<Vec<f64>> = w
                .chunks(n)
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.iter().map(|x| x / s).collect()
                })
                .collect();
            TransitionMatrix::from_rows(&rows).unwrap()
        })
    })
}

/// Pair-space vectors of length `n²` for `n ∈ [1, 8]`.
pub fn pair_vector() -> impl Strategy<Value = Vec<f64>> {
    (1..=8usize).prop_flat_map(|n| proptest::collection::vec(-10.0f64..10.0, n * n))
}

pub fn test_vector(len: usize, seed: u64) -> Vec<f64> {
    (0..len).map(|i| (((i as u64 + 1) * (seed * 2 + 1) * 2654435761) % 2001) as f64 / 1000.0 - 1.0).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn diagonal_mask(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n * n, n * n, |r, c| if r == c && r % (n + 1) != 0 { 1.0 } else { 0.0 })
}

/// Explicit Kronecker-product construction of each pair operator.
pub fn dense_oracle(p: &TransitionMatrix, mode: PairMode) -> DMatrix<f64> {
    let n = p.n();
    let id = DMatrix::identity(n * n, n * n);
    let kron = p.matrix().kronecker(p.matrix());
    let e = diagonal_mask(n);
    match mode {
        PairMode::L => &id - &kron,
        PairMode::LKill => &id - &kron * &e,
        PairMode::Kron => kron,
        PairMode::Perturbation => &kron * (&e - &id),
    }
}

pub fn check_mask_idempotent(x: &[f64]) -> Result<(), TestCaseError> {
    let once = apply_e(x).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let twice = apply_e(&once).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(once, twice);
    Ok(())
}

pub fn check_operator_matches_oracle(p: &TransitionMatrix, seed: u64) -> Result<(), TestCaseError> {
    let n = p.n();
    let x = test_vector(n * n, seed);
    let xv = DVector::from_column_slice(&x);
    for mode in MODES {
        let op = PairOperator::new(p, mode);
        let dense = dense_oracle(p, mode);
        let want = &dense * &xv;
        let want_t = dense.transpose() * &xv;
        for (a, b) in op.apply(&x).iter().zip(want.iter()) {
            prop_assert!((a - b).abs() <= 1e-12, "{:?}: {} vs {}", mode, a, b);
        }
        for (a, b) in op.apply_transpose(&x).iter().zip(want_t.iter()) {
            prop_assert!((a - b).abs() <= 1e-12, "{:?} transposed: {} vs {}", mode, a, b);
        }
    }
    Ok(())
}

pub fn check_adjoint(p: &TransitionMatrix, s1: u64, s2: u64) -> Result<(), TestCaseError> {
    let n = p.n();
    let x = test_vector(n * n, s1);
    let y = test_vector(n * n, s2);
    for mode in MODES {
        let op = PairOperator::new(p, mode);
        let lhs = dot(&op.apply(&x), &y);
        let rhs = dot(&x, &op.apply_transpose(&y));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()), "{:?}: {} vs {}", mode, lhs, rhs);
    }
    Ok(())
}

/// `(P⊗P)E` is entrywise nonnegative, has row sums at most one and zero diagonal-pair columns.
pub fn check_killed_substochastic(p: &TransitionMatrix) -> Result<(), TestCaseError> {
    let n = p.n();
    let op = PairOperator::new(p, PairMode::LKill);
    let lkill = op.materialize().map_err(|e| TestCaseError::fail(e.to_string()))?;
    let killed = DMatrix::identity(n * n, n * n) - lkill;
    for r in 0..n * n {
        let row = killed.row(r);
        prop_assert!(row.iter().all(|&x| x >= -1e-15));
        prop_assert!(row.sum() <= 1.0 + 1e-12);
        for d in 0..n {
            prop_assert_eq!(killed[(r, d * (n + 1))], 0.0);
        }
    }
    Ok(())
}
