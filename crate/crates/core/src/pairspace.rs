// SPDX-License-Identifier: Apache-2.0

//! Pair-space operators on `R^{n²}`.
//!
//! A vector `x` of length `n²` is identified with the `n × n` array `X` via
//! the flattening `(k, l) ↦ (k−1)n + l` (1-based), so entry `(k, l)` of `X`
//! lives at 0-based offset `(k−1)n + (l−1)`. With that convention
//!
//! ```text
//! (P⊗P) x  =  vec(P X Pᵗ)          (P⊗P)ᵗ x  =  vec(Pᵗ X P)
//! ```
//!
//! which costs `O(n³)` time and `O(n²)` memory; `P⊗P` itself is never built.
//!
//! `E` is the diagonal projection that zeroes the meeting set
//! `D = {(i, i)}`, i.e. offsets `0, n+1, 2(n+1), …, n²−1`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::markov::TransitionMatrix;

/// Largest base dimension for which dense `n² × n²` work is allowed.
pub const DEFAULT_DENSE_THRESHOLD: usize = 40;

/// 1-based flattening of pair indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    n: usize,
}

impl PairIndex {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn flatten(&self, k: usize, l: usize) -> Result<usize> {
        flatten(k, l, self.n)
    }

    pub fn unflatten(&self, idx: usize) -> Result<(usize, usize)> {
        if idx == 0 || idx > self.len() {
            return Err(Error::invalid(format!("pair index {idx} outside 1..={}", self.len())));
        }
        Ok(((idx - 1) / self.n + 1, (idx - 1) % self.n + 1))
    }

    /// The meeting set `D` as 1-based flat indices: `1, n+2, 2n+3, …, n²`.
    pub fn diagonal(&self) -> Vec<usize> {
        (0..self.n).map(|i| i * (self.n + 1) + 1).collect()
    }
}

/// `(k−1)·n + l` for `1 ≤ k, l ≤ n`.
pub fn flatten(k: usize, l: usize, n: usize) -> Result<usize> {
    if k == 0 || l == 0 || k > n || l > n {
        return Err(Error::Index { k, l, n });
    }
    Ok((k - 1) * n + l)
}

fn base_dim(p: &TransitionMatrix, len: usize) -> Result<usize> {
    let n = p.n();
    Error::check_len(n * n, len)?;
    Ok(n)
}

fn dim_from_len(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(Error::invalid(format!("vector length {len} is not a perfect square")));
    }
    Ok(n)
}

pub(crate) fn kill_diagonal(x: &mut [f64], n: usize) {
    for i in 0..n {
        x[i * (n + 1)] = 0.0;
    }
}

/// `x` restricted to `D` (off-diagonal entries zeroed), i.e. `(I − E)x`.
pub(crate) fn keep_diagonal(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 0..n {
        out[i * (n + 1)] = x[i * (n + 1)];
    }
    out
}

/// `E x`: zero the coordinates in `D`.
pub fn apply_e(x: &[f64]) -> Result<Vec<f64>> {
    let n = dim_from_len(x.len())?;
    let mut out = x.to_vec();
    kill_diagonal(&mut out, n);
    Ok(out)
}

/// `vec(A X Aᵗ)` where `X` is the array stored row-major in `x`.
fn sandwich(a: &DMatrix<f64>, x: &[f64], a_t: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    // Read column-major, `x` is Xᵗ; and (A X Aᵗ)ᵗ = A Xᵗ Aᵗ, so the
    // column-major product is the row-major result.
    let xc = DMatrix::from_column_slice(n, n, x);
    let y = a * xc * a_t;
    y.data.into()
}

pub(crate) fn kron_unchecked(p: &TransitionMatrix, x: &[f64]) -> Vec<f64> {
    sandwich(p.matrix(), x, p.transpose())
}

pub(crate) fn kron_t_unchecked(p: &TransitionMatrix, x: &[f64]) -> Vec<f64> {
    sandwich(p.transpose(), x, p.matrix())
}

/// `(P⊗P) x`.
pub fn apply_kron(p: &TransitionMatrix, x: &[f64]) -> Result<Vec<f64>> {
    base_dim(p, x.len())?;
    Ok(kron_unchecked(p, x))
}

/// `(P⊗P)ᵗ x`.
pub fn apply_kron_transpose(p: &TransitionMatrix, x: &[f64]) -> Result<Vec<f64>> {
    base_dim(p, x.len())?;
    Ok(kron_t_unchecked(p, x))
}

/// `L x = x − (P⊗P) x`.
pub fn apply_l(p: &TransitionMatrix, x: &[f64]) -> Result<Vec<f64>> {
    PairOperator::new(p, PairMode::L).checked_apply(x)
}

pub fn apply_l_transpose(p: &TransitionMatrix, x: &[f64]) -> Result<Vec<f64>> {
    PairOperator::new(p, PairMode::L).checked_apply_transpose(x)
}

/// `L_kill x = x − (P⊗P) E x`.
pub fn apply_lkill(p: &TransitionMatrix, x: &[f64]) -> Result<Vec<f64>> {
    PairOperator::new(p, PairMode::LKill).checked_apply(x)
}

/// `L_killᵗ x = x − E (P⊗P)ᵗ x`.
pub fn apply_lkill_transpose(p: &TransitionMatrix, x: &[f64]) -> Result<Vec<f64>> {
    PairOperator::new(p, PairMode::LKill).checked_apply_transpose(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    /// `I − P⊗P`, the generator of the independent pair.
    L,
    /// `I − (P⊗P)E`, the diagonally killed generator.
    LKill,
    /// `P⊗P`.
    Kron,
    /// `(P⊗P)(E − I)`, the difference `L − L_kill`.
    Perturbation,
}

/// Matrix-free view of one of the pair-space operators of `P`.
#[derive(Debug, Clone, Copy)]
pub struct PairOperator<'a> {
    p: &'a TransitionMatrix,
    mode: PairMode,
}

impl<'a> PairOperator<'a> {
    pub fn new(p: &'a TransitionMatrix, mode: PairMode) -> Self {
        Self { p, mode }
    }

    pub fn killed(p: &'a TransitionMatrix) -> Self {
        Self::new(p, PairMode::LKill)
    }

    pub fn mode(&self) -> PairMode {
        self.mode
    }

    pub fn transition(&self) -> &'a TransitionMatrix {
        self.p
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn checked_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        base_dim(self.p, x.len())?;
        Ok(self.apply(x))
    }

    pub fn checked_apply_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        base_dim(self.p, x.len())?;
        Ok(self.apply_transpose(x))
    }

    /// Dense `n² × n²` matrix whose column `j` is `apply(e_j)`.
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        self.materialize_with_threshold(DEFAULT_DENSE_THRESHOLD)
    }

    pub fn materialize_with_threshold(&self, threshold: usize) -> Result<DMatrix<f64>> {
        let n = self.n();
        if n > threshold {
            return Err(Error::SizeLimit { n, threshold });
        }
        // Entry ((i,j),(k,l)) of P⊗P is P_ik P_jl; fill directly instead of n² applies.
        let p = self.p.matrix();
        let nn = n * n;
        let mut m = DMatrix::zeros(nn, nn);
        for i in 0..n {
            for j in 0..n {
                let row = i * n + j;
                for k in 0..n {
                    let pik = p[(i, k)];
                    if pik == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        m[(row, k * n + l)] = pik * p[(j, l)];
                    }
                }
            }
        }
        let diag: Vec<usize> = (0..n).map(|i| i * (n + 1)).collect();
        match self.mode {
            PairMode::Kron => {}
            PairMode::L => {
                m.neg_mut();
                for r in 0..nn {
                    m[(r, r)] += 1.0;
                }
            }
            PairMode::LKill => {
                for &c in &diag {
                    m.column_mut(c).fill(0.0);
                }
                m.neg_mut();
                for r in 0..nn {
                    m[(r, r)] += 1.0;
                }
            }
            PairMode::Perturbation => {
                // (P⊗P)(E − I) keeps only the D columns, negated.
                let mut out = DMatrix::zeros(nn, nn);
                for &c in &diag {
                    out.set_column(c, &(-m.column(c)));
                }
                m = out;
            }
        }
        Ok(m)
    }
}

impl LinearOperator for PairOperator<'_> {
    fn dim(&self) -> usize {
        self.n() * self.n()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        match self.mode {
            PairMode::Kron => kron_unchecked(self.p, x),
            PairMode::L => {
                let y = kron_unchecked(self.p, x);
                x.iter().zip(y).map(|(a, b)| a - b).collect()
            }
            PairMode::LKill => {
                let mut ex = x.to_vec();
                kill_diagonal(&mut ex, n);
                let y = kron_unchecked(self.p, &ex);
                x.iter().zip(y).map(|(a, b)| a - b).collect()
            }
            PairMode::Perturbation => {
                let mut y = kron_unchecked(self.p, &keep_diagonal(x, n));
                y.iter_mut().for_each(|v| *v = -*v);
                y
            }
        }
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        match self.mode {
            PairMode::Kron => kron_t_unchecked(self.p, x),
            PairMode::L => {
                let y = kron_t_unchecked(self.p, x);
                x.iter().zip(y).map(|(a, b)| a - b).collect()
            }
            PairMode::LKill => {
                let mut y = kron_t_unchecked(self.p, x);
                kill_diagonal(&mut y, n);
                x.iter().zip(y).map(|(a, b)| a - b).collect()
            }
            PairMode::Perturbation => {
                let y = kron_t_unchecked(self.p, x);
                let mut out = keep_diagonal(&y, n);
                out.iter_mut().for_each(|v| *v = -*v);
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::Graph;
    use crate::markov::srw_from_graph;

    #[test]
    fn flatten_examples() {
        assert_eq!(flatten(1, 1, 4).unwrap(), 1);
        assert_eq!(flatten(2, 3, 4).unwrap(), 7);
        assert_eq!(flatten(4, 4, 4).unwrap(), 16);
        assert!(matches!(flatten(0, 1, 4), Err(Error::Index { .. })));
        assert!(flatten(5, 1, 4).is_err());
        assert!(flatten(1, 5, 4).is_err());
    }

    #[test]
    fn pair_index_bijection() {
        let idx = PairIndex::new(5);
        for k in 1..=5 {
            for l in 1..=5 {
                assert_eq!(idx.unflatten(idx.flatten(k, l).unwrap()).unwrap(), (k, l));
            }
        }
        assert_eq!(idx.diagonal(), vec![1, 7, 13, 19, 25]);
        assert_eq!(PairIndex::new(4).diagonal(), vec![1, 6, 11, 16]);
        assert!(idx.unflatten(0).is_err());
        assert!(idx.unflatten(26).is_err());
    }

    #[test]
    fn apply_e_examples() {
        let n = 3;
        let vec_id: Vec<f64> = (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect();
        assert!(apply_e(&vec_id).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(apply_e(&[1.0; 4]).unwrap(), vec![0.0, 1.0, 1.0, 0.0]);
        let off = vec![0.0, 2.0, 3.0, 0.0];
        assert_eq!(apply_e(&off).unwrap(), off);
        assert!(apply_e(&[1.0; 5]).is_err());
    }

    #[test]
    fn identity_kron_is_identity() {
        let p = TransitionMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let x: Vec<f64> = (0..9).map(|i| i as f64 * 0.7 - 2.0).collect();
        assert_eq!(apply_kron(&p, &x).unwrap(), x);
    }

    #[test]
    fn l_annihilates_ones_and_lkill_fixes_vec_identity() {
        let p = srw_from_graph(&Graph::path(4)).unwrap();
        let ones = vec![1.0; 16];
        assert!(apply_l(&p, &ones).unwrap().iter().all(|v| v.abs() < 1e-15));
        let vec_id: Vec<f64> = (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 }).collect();
        assert_eq!(apply_lkill(&p, &vec_id).unwrap(), vec_id);
    }

    #[test]
    fn dimension_errors() {
        let p = srw_from_graph(&Graph::path(3)).unwrap();
        assert!(matches!(apply_kron(&p, &[0.0; 4]), Err(Error::Dimension { expected: 9, actual: 4 })));
        assert!(apply_lkill_transpose(&p, &[0.0; 8]).is_err());
    }

    #[test]
    fn materialize_limits() {
        let p1 = TransitionMatrix::new(DMatrix::identity(1, 1)).unwrap();
        let m = PairOperator::killed(&p1).materialize().unwrap();
        assert_eq!(m, DMatrix::from_element(1, 1, 1.0));
        let big = srw_from_graph(&Graph::complete(41)).unwrap();
        assert!(matches!(PairOperator::killed(&big).materialize(), Err(Error::SizeLimit { n: 41, .. })));
    }

    #[test]
    fn swap_chain_lkill_is_singular() {
        let p = TransitionMatrix::swap2();
        let m = PairOperator::killed(&p).materialize().unwrap();
        assert!(m.determinant().abs() < 1e-15);
    }
}
