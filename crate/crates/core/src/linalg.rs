// SPDX-License-Identifier: Apache-2.0

//! Small dense-vector helpers and the operator trait shared by the
//! matrix-free solvers.

use nalgebra::DMatrix;

/// A real square linear map known only through its action and the action of
/// its transpose.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn apply_transpose(&self, x: &[f64]) -> Vec<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self * nalgebra::DVector::from_column_slice(x)).data.into()
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        (self.tr_mul(&nalgebra::DVector::from_column_slice(x))).data.into()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y ← y + alpha·x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Removes the component along the unit vector `unit`.
pub fn project_out(x: &mut [f64], unit: &[f64]) {
    let c = dot(x, unit);
    axpy(-c, unit, x);
}

/// Materialises any operator column by column.
pub fn to_dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        m.set_column(j, &nalgebra::DVector::from_vec(op.apply(&e)));
        e[j] = 0.0;
    }
    m
}

/// Full SVD `A = U·diag(σ)·Vᵗ` of a square matrix, `σ` non-increasing.
pub struct DenseSvd {
    pub sigma: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

/// Backward-stable dense SVD; residual `‖A − UΣVᵗ‖` stays at rounding level.
pub fn dense_svd(a: &DMatrix<f64>) -> DenseSvd {
    let (rows, cols) = a.shape();
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    let svd = m.svd().expect("SVD of a finite matrix converges");
    let s = svd.S().column_vector();
    let k = s.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    // stable: ties keep discovery order
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    let (fu, fv) = (svd.U(), svd.V());
    DenseSvd {
        sigma: order.iter().map(|&i| s[i].max(0.0)).collect(),
        u: DMatrix::from_fn(rows, k, |r, c| fu[(r, order[c])]),
        v: DMatrix::from_fn(cols, k, |r, c| fv[(r, order[c])]),
    }
}

/// Largest singular value of a dense matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| a[(i, j)]);
    m.singular_values().expect("SVD of a finite matrix converges").into_iter().fold(0.0, f64::max)
}
