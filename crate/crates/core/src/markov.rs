// SPDX-License-Identifier: Apache-2.0

//! Row-stochastic transition matrices, stationary distributions and the
//! structural checks (irreducibility, period) on the support digraph.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graphs::Graph;

const ROW_SUM_TOL: f64 = 1e-12;
/// Rows read from CSV may carry decimal rounding up to this much; they are renormalised.
const CSV_ROW_SUM_TOL: f64 = 1e-6;

/// A row-stochastic `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    p: DMatrix<f64>,
    pt: DMatrix<f64>,
    /// Degrees of the underlying graph when built by [`srw_from_graph`]
    /// (or its lazy version), enabling the closed-form stationary law.
    degrees: Option<Vec<usize>>,
}

impl TransitionMatrix {
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() || p.nrows() == 0 {
            return Err(Error::invalid(format!("transition matrix must be square and non-empty, got {}x{}", p.nrows(), p.ncols())));
        }
        for (i, row) in p.row_iter().enumerate() {
            if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::invalid(format!("entry {x} in row {i} is outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {i} sums to {s}")));
            }
        }
        let pt = p.transpose();
        Ok(Self { p, pt, degrees: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("rows must all have length n"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// The deterministic swap chain on two states, period 2.
    pub fn swap2() -> Self {
        Self::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).expect("valid")
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn transpose(&self) -> &DMatrix<f64> {
        &self.pt
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn srw_degrees(&self) -> Option<&[usize]> {
        self.degrees.as_deref()
    }

    /// `(I + P)/2`. The stationary law is unchanged.
    pub fn lazy(&self) -> Self {
        let n = self.n();
        let p = (&self.p + DMatrix::identity(n, n)) * 0.5;
        let pt = p.transpose();
        Self { p, pt, degrees: self.degrees.clone() }
    }

    /// Writes the full dense matrix, row-major, one row per line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_matrix_csv(&self.p, out)
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut p = read_matrix_csv(input)?;
        if !p.is_square() {
            return Err(Error::invalid(format!("CSV matrix is {}x{}, not square", p.nrows(), p.ncols())));
        }
        for i in 0..p.nrows() {
            let s: f64 = p.row(i).sum();
            if (s - 1.0).abs() > CSV_ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {i} sums to {s}")));
            }
            p.row_mut(i).unscale_mut(s);
        }
        Self::new(p)
    }
}

pub(crate) fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| format!("{x:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_matrix_csv<R: Read>(input: R) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse { line: i + 1, msg: format!("{e}: {s:?}") }))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid("ragged CSV matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Simple random walk: `P[i][j] = 1{i ~ j}/deg(i)`.
pub fn srw_from_graph(g: &Graph) -> Result<TransitionMatrix> {
    if let Some(vertex) = g.isolated_vertex() {
        return Err(Error::DegenerateGraph { vertex });
    }
    let n = g.n();
    if n == 0 {
        return Err(Error::invalid("graph has no vertices"));
    }
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = 1.0 / g.degree(i) as f64;
        for &j in g.neighbors(i) {
            p[(i, j)] = w;
        }
    }
    let pt = p.transpose();
    Ok(TransitionMatrix { p, pt, degrees: Some(g.degrees()) })
}

/// Probability vector invariant under `P`, with its squared Euclidean norm cached.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
    sq_norm: f64,
}

impl StationaryDistribution {
    /// Wraps an arbitrary probability vector. Invariance under a particular
    /// `P` is not checked here; see [`stationary`].
    pub fn from_probabilities(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if pi.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::invalid("distribution has negative or NaN entries"));
        }
        let s: f64 = pi.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::invalid(format!("distribution sums to {s}")));
        }
        let sq_norm = pi.iter().map(|x| x * x).sum();
        Ok(Self { pi, sq_norm })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `‖π‖²`.
    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    /// Flattened `π ⊗ π`, entry `(i−1)n + j` holding `π_i π_j`.
    pub fn kron_self(&self) -> Vec<f64> {
        let pi = &self.pi;
        pi.iter().flat_map(|&a| pi.iter().map(move |&b| a * b)).collect()
    }

    /// `max_j |(πᵗP)_j − π_j|`.
    pub fn invariance_residual(&self, p: &TransitionMatrix) -> f64 {
        let row = p.transpose() * DVector::from_column_slice(&self.pi);
        row.iter().zip(&self.pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Stationary distribution of an irreducible chain. Simple random walks use
/// `deg(i)/(2|E|)`; other chains solve `(Pᵗ − I)π = 0, 1ᵗπ = 1` by QR least squares.
pub fn stationary(p: &TransitionMatrix) -> Result<StationaryDistribution> {
    if !check_irreducible(p) {
        return Err(Error::NoUniqueStationary);
    }
    if let Some(deg) = p.srw_degrees() {
        let total: usize = deg.iter().sum();
        let pi = deg.iter().map(|&d| d as f64 / total as f64).collect();
        return StationaryDistribution::from_probabilities(pi);
    }

    let n = p.n();
    let mut a = DMatrix::zeros(n + 1, n);
    a.view_mut((0, 0), (n, n)).copy_from(&(p.transpose() - DMatrix::<f64>::identity(n, n)));
    a.row_mut(n).fill(1.0);
    let mut b = DVector::zeros(n + 1);
    b[n] = 1.0;

    let qr = a.qr();
    let rhs = qr.q().transpose() * b;
    let x = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or(Error::NoUniqueStationary)?;
    let mut pi: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    let dist = StationaryDistribution::from_probabilities(pi)?;
    let res = dist.invariance_residual(p);
    if res > 1e-10 {
        return Err(Error::Inconsistency(format!("stationary solve residual {res:e}")));
    }
    Ok(dist)
}

fn support(p: &TransitionMatrix) -> Vec<Vec<usize>> {
    let n = p.n();
    (0..n).map(|i| (0..n).filter(|&j| p.get(i, j) > 0.0).collect()).collect()
}

fn reach_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn reverse(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut rev = vec![Vec::new(); adj.len()];
    for (u, list) in adj.iter().enumerate() {
        for &v in list {
            rev[v].push(u);
        }
    }
    rev
}

/// Strong connectivity of the support digraph.
pub fn check_irreducible(p: &TransitionMatrix) -> bool {
    let adj = support(p);
    reach_all(&adj, 0) && reach_all(&reverse(&adj), 0)
}

/// Strongly connected components (Kosaraju), each as a list of states.
fn components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some((u, idx)) = stack.pop() {
            if idx < adj[u].len() {
                stack.push((u, idx + 1));
                let v = adj[u][idx];
                if !seen[v] {
                    seen[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
            }
        }
    }
    let rev = reverse(adj);
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &v in &rev[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        out.push(members);
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Greatest common divisor of all cycle lengths in the support digraph, or
/// `None` when the digraph has no cycle at all.
pub fn period(p: &TransitionMatrix) -> Option<usize> {
    let adj = support(p);
    let mut g = 0usize;
    for members in components(&adj) {
        let mut in_comp = vec![false; adj.len()];
        members.iter().for_each(|&m| in_comp[m] = true);
        let mut level = vec![usize::MAX; adj.len()];
        level[members[0]] = 0;
        let mut queue = std::collections::VecDeque::from([members[0]]);
        while let Some(u) = queue.pop_front() {
            for &v in adj[u].iter().filter(|&&v| in_comp[v]) {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else {
                    g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                }
            }
        }
    }
    (g > 0).then_some(g)
}

pub fn check_aperiodic(p: &TransitionMatrix) -> bool {
    period(p) == Some(1)
}
