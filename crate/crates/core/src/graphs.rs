// SPDX-License-Identifier: Apache-2.0

//! Undirected simple graphs, Erdős–Rényi sampling and the degree/codegree
//! concentration statistics that control the dense-regime analysis.
//!
//! Vertices are 0-based in the API. The text format is 1-based.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph stored as sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from 0-based edges. Self-loops, duplicates (in either
    /// orientation) and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at vertex {u}")));
            }
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for (u, list) in neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            if list.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("duplicate edge at vertex {u}")));
            }
        }
        Ok(Self { n, neighbors, edge_count: edges.len() })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, neighbors: vec![Vec::new(); n], edge_count: 0 }
    }

    pub fn complete(n: usize) -> Self {
        let neighbors = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Self { n, neighbors, edge_count: n * n.saturating_sub(1) / 2 }
    }

    /// Path 0 – 1 – … – (n−1).
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("a simple cycle needs n >= 3"));
        }
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((0, n - 1));
        Self::from_edges(n, &edges)
    }

    /// Star with centre 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Self::from_edges(leaves + 1, &edges).expect("star edges are valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.neighbors[u].binary_search(&v).is_ok()
    }

    /// Edges as 0-based pairs `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (u, v) in self.edges() {
            a[(u, v)] = 1.0;
            a[(v, u)] = 1.0;
        }
        a
    }

    pub fn isolated_vertex(&self) -> Option<usize> {
        self.neighbors.iter().position(Vec::is_empty)
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Writes the text format: `n m`, then one `u v` line per edge (1-based, `u < v`).
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "{} {}", self.n, self.edge_count).unwrap();
        for (u, v) in self.edges() {
            writeln!(buf, "{} {}", u + 1, v + 1).unwrap();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_text(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("ascii output")
    }

    /// Parses the text format. Blank lines and lines starting with `#` are skipped.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty() && !s.trim_start().starts_with('#')));

        let (line_no, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let (n, m) = parse_pair(&header?, line_no)?;

        let mut edges = Vec::with_capacity(m);
        for (line_no, line) in lines {
            let (u, v) = parse_pair(&line?, line_no)?;
            let bad = |msg: String| Error::Parse { line: line_no, msg };
            if u == v {
                return Err(bad(format!("self-loop at vertex {u}")));
            }
            if u == 0 || v == 0 || u > n || v > n {
                return Err(bad(format!("vertex index out of range 1..={n}")));
            }
            if u > v {
                return Err(bad(format!("edge must be written with u < v, got {u} {v}")));
            }
            edges.push((u - 1, v - 1));
        }
        if edges.len() != m {
            return Err(Error::Parse { line: 1, msg: format!("header declares {m} edges, found {}", edges.len()) });
        }
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Parse { line: 0, msg: format!("duplicate edge {} {}", w[0].0 + 1, w[0].1 + 1) });
        }
        Self::from_edges(n, &edges)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_text(text.as_bytes())
    }
}

fn parse_pair(line: &str, line_no: usize) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = || -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse { line: line_no, msg: "expected two integers".into() })?
            .parse()
            .map_err(|e| Error::Parse { line: line_no, msg: format!("{e}") })
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::Parse { line: line_no, msg: "trailing tokens".into() });
    }
    Ok((a, b))
}

/// Erdős–Rényi parameters. `d = n·p` is the degree scale used by every statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErParams {
    pub n: usize,
    pub p: f64,
    pub d: f64,
}

impl ErParams {
    /// `p = min(c·n^(β−1), 1)`.
    pub fn from_beta(n: usize, beta: f64, c: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid(format!("beta must lie in (0, 1], got {beta}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("c must be positive, got {c}")));
        }
        Self::from_p(n, (c * (n as f64).powf(beta - 1.0)).min(1.0))
    }

    pub fn from_p(n: usize, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("p must lie in [0, 1], got {p}")));
        }
        Ok(Self { n, p, d: n as f64 * p })
    }
}

/// Samples G(n, p). Pairs `i < j` are visited in lexicographic order with one
/// Bernoulli draw each, so the edge set is a pure function of `(params, seed)`.
pub fn er_sample(params: &ErParams, seed: u64) -> Graph {
    let n = params.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(params.p) {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("sampled edges are valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    /// `deg(i)/d − 1`.
    pub eps: Vec<f64>,
    pub r1: f64,
}

pub fn degree_stats(g: &Graph, d: f64) -> Result<DegreeStats> {
    check_scale(d)?;
    let eps: Vec<f64> = (0..g.n()).map(|i| g.degree(i) as f64 / d - 1.0).collect();
    let r1 = eps.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    Ok(DegreeStats { eps, r1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodegreeStats {
    n: usize,
    /// Common-neighbour counts, row-major `n × n`; the diagonal is unused.
    codegree: Vec<u32>,
    scale: f64,
    pub r2: f64,
}

impl CodegreeStats {
    pub fn codegree(&self, k: usize, l: usize) -> u32 {
        self.codegree[k * self.n + l]
    }

    /// `(n/d²)·codeg(k, l) − 1` for `k ≠ l`.
    pub fn eps(&self, k: usize, l: usize) -> f64 {
        self.scale * self.codegree(k, l) as f64 - 1.0
    }
}

/// Codegree statistics via neighbour-pair enumeration, `O(Σ deg²)`.
pub fn codegree_stats(g: &Graph, d: f64) -> Result<CodegreeStats> {
    check_scale(d)?;
    let n = g.n();
    if n < 2 {
        return Err(Error::invalid("codegree statistics need n >= 2"));
    }
    let mut codegree = vec![0u32; n * n];
    for i in 0..n {
        let nb = g.neighbors(i);
        for (a, &k) in nb.iter().enumerate() {
            for &l in &nb[a + 1..] {
                codegree[k * n + l] += 1;
                codegree[l * n + k] += 1;
            }
        }
    }
    Ok(finish_codegree(n, codegree, d))
}

/// Dense `A²` reference for [`codegree_stats`].
pub fn codegree_stats_dense(g: &Graph, d: f64) -> Result<CodegreeStats> {
    check_scale(d)?;
    let n = g.n();
    if n < 2 {
        return Err(Error::invalid("codegree statistics need n >= 2"));
    }
    let a = g.adjacency_matrix();
    let sq = &a * &a;
    let codegree = (0..n * n)
        .map(|idx| if idx / n == idx % n { 0 } else { sq[(idx / n, idx % n)].round() as u32 })
        .collect();
    Ok(finish_codegree(n, codegree, d))
}

fn finish_codegree(n: usize, codegree: Vec<u32>, d: f64) -> CodegreeStats {
    let scale = n as f64 / (d * d);
    let mut r2 = 0.0_f64;
    for k in 0..n {
        for l in 0..n {
            if k != l {
                r2 = r2.max((scale * codegree[k * n + l] as f64 - 1.0).abs());
            }
        }
    }
    CodegreeStats { n, codegree, scale, r2 }
}

/// Second-largest singular value of `A/√d`, i.e. the second entry of the
/// adjacency eigenvalues sorted by decreasing magnitude, divided by `√d`.
pub fn adjacency_sigma2(g: &Graph, d: f64) -> Result<f64> {
    check_scale(d)?;
    if g.n() < 2 {
        return Err(Error::invalid("sigma_2 needs n >= 2"));
    }
    let eig = SymmetricEigen::new(g.adjacency_matrix());
    let mut mags: Vec<f64> = eig.eigenvalues.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags[1] / d.sqrt())
}

fn check_scale(d: f64) -> Result<()> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("degree scale d must be positive, got {d}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventFlags {
    /// `R1 ≤ ν1`
    pub f_nu1: bool,
    /// `R1 ≤ ν1` and `R2 ≤ ν2`
    pub f_nu1_nu2: bool,
    /// `σ2(A/√d) ≤ 8`
    pub f_sigma: bool,
}

impl EventFlags {
    pub fn evaluate(r1: f64, r2: f64, sigma2_scaled: f64, nu1: f64, nu2: f64) -> Self {
        let f_nu1 = r1 <= nu1;
        Self { f_nu1, f_nu1_nu2: f_nu1 && r2 <= nu2, f_sigma: sigma2_scaled <= SIGMA2_CEILING }
    }
}

pub const SIGMA2_CEILING: f64 = 8.0;

/// Values of the three regularity conditions for a single graph together with
/// their pass/fail status at a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub d: f64,
    pub tol: f64,
    pub r1: f64,
    pub r2: f64,
    pub sigma2_scaled: f64,
    pub r1_ok: bool,
    pub r2_ok: bool,
    pub sigma2_ok: bool,
}

pub fn check_regularity_conditions(g: &Graph, d: f64, tol: f64) -> Result<RegularityReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let r1 = degree_stats(g, d)?.r1;
    let r2 = codegree_stats(g, d)?.r2;
    let sigma2_scaled = adjacency_sigma2(g, d)?;
    Ok(RegularityReport {
        d,
        tol,
        r1,
        r2,
        sigma2_scaled,
        r1_ok: r1 <= tol,
        r2_ok: r2 <= tol,
        sigma2_ok: sigma2_scaled <= SIGMA2_CEILING,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extremes() {
        let k5 = er_sample(&ErParams::from_p(5, 1.0).unwrap(), 7);
        assert_eq!(k5, Graph::complete(5));
        assert!(k5.degrees().iter().all(|&d| d == 4));
        let empty = er_sample(&ErParams::from_p(5, 0.0).unwrap(), 7);
        assert_eq!(empty.edge_count(), 0);
    }

    #[test]
    fn er_is_reproducible() {
        let params = ErParams::from_p(60, 0.3).unwrap();
        assert_eq!(er_sample(&params, 11), er_sample(&params, 11));
        assert_ne!(er_sample(&params, 11), er_sample(&params, 12));
    }

    #[test]
    fn er_params_saturate() {
        let p = ErParams::from_beta(4, 0.5, 10.0).unwrap();
        assert_eq!(p.p, 1.0);
        assert_eq!(p.d, 4.0);
        let p = ErParams::from_beta(100, 0.8, 1.0).unwrap();
        assert!((p.d - 100f64.powf(0.8)).abs() < 1e-9);
        assert!(ErParams::from_beta(10, 0.0, 1.0).is_err());
        assert!(ErParams::from_beta(10, 0.5, -1.0).is_err());
    }

    #[test]
    fn degree_stats_examples() {
        assert_eq!(degree_stats(&Graph::complete(5), 4.0).unwrap().r1, 0.0);
        assert!((degree_stats(&Graph::complete(5), 5.0).unwrap().r1 - 0.2).abs() < 1e-15);
        assert_eq!(degree_stats(&Graph::star(4), 2.0).unwrap().r1, 1.0);
        assert!(degree_stats(&Graph::star(4), 0.0).is_err());
    }

    #[test]
    fn codegree_examples() {
        for n in [3usize, 5, 9] {
            let d = (n - 1) as f64;
            let r2 = codegree_stats(&Graph::complete(n), d).unwrap().r2;
            let expected = (n as f64 * (n - 2) as f64 / (d * d) - 1.0).abs();
            assert!((r2 - expected).abs() < 1e-14);
        }
        assert_eq!(codegree_stats(&Graph::empty(6), 2.5).unwrap().r2, 1.0);
        // n/d² = 1 on the 3-path
        let s = codegree_stats(&Graph::path(3), 3f64.sqrt()).unwrap();
        assert!(s.eps(0, 2).abs() < 1e-12);
        assert!((s.eps(0, 1) + 1.0).abs() < 1e-12);
        assert!((s.r2 - 1.0).abs() < 1e-12);
        assert!(codegree_stats(&Graph::empty(1), 1.0).is_err());
    }

    #[test]
    fn codegree_routes_agree() {
        let g = er_sample(&ErParams::from_p(40, 0.4).unwrap(), 3);
        let fast = codegree_stats(&g, 16.0).unwrap();
        let dense = codegree_stats_dense(&g, 16.0).unwrap();
        assert_eq!(fast, dense);
    }

    #[test]
    fn sigma2_examples() {
        for n in [3usize, 6, 12] {
            let s = adjacency_sigma2(&Graph::complete(n), (n - 1) as f64).unwrap();
            assert!((s - 1.0 / ((n - 1) as f64).sqrt()).abs() < 1e-12);
        }
        let k2 = Graph::from_edges(2, &[(0, 1)]).unwrap();
        assert!((adjacency_sigma2(&k2, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(adjacency_sigma2(&Graph::empty(1), 1.0).is_err());
    }

    #[test]
    fn cycle_fails_codegree_condition() {
        let g = Graph::cycle(40).unwrap();
        let rep = check_regularity_conditions(&g, 2.0, 0.5).unwrap();
        assert_eq!(rep.r1, 0.0);
        assert!(rep.r1_ok);
        // vertices two apart share one neighbour: eps = n/4 − 1
        assert!((rep.r2 - (40.0 / 4.0 - 1.0)).abs() < 1e-12);
        assert!(!rep.r2_ok);
    }

    #[test]
    fn text_format_roundtrip_and_rejections() {
        let g = er_sample(&ErParams::from_p(12, 0.5).unwrap(), 5);
        assert_eq!(Graph::from_text(&g.to_text()).unwrap(), g);

        assert!(Graph::from_text("3 1\n2 2\n").is_err());
        assert!(Graph::from_text("3 2\n1 2\n1 2\n").is_err());
        assert!(Graph::from_text("3 1\n1 4\n").is_err());
        assert!(Graph::from_text("3 1\n0 1\n").is_err());
        assert!(Graph::from_text("3 2\n1 2\n").is_err());
        assert!(Graph::from_text("3 1\n2 1\n").is_err());
        assert!(Graph::from_text("# comment\n3 1\n\n1 3\n").is_ok());
    }

    #[test]
    fn from_edges_rejects_duplicates_either_orientation() {
        assert!(Graph::from_edges(3, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edges(3, &[(0, 3)]).is_err());
    }
}
