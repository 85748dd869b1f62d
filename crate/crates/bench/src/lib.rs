// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures for the benchmarks.

use meetsvd_core::{er_sample, srw_from_graph, ErParams, TransitionMatrix};

/// Simple random walk on a connected `G(n, p)` sample, retrying seeds until connected.
pub fn er_walk(n: usize, p: f64, seed: u64) -> TransitionMatrix {
    let params = ErParams::from_p(n, p).expect("valid parameters");
    (seed..)
        .map(|s| er_sample(&params, s))
        .find(|g| g.is_connected())
        .map(|g| srw_from_graph(&g).expect("connected graph has a walk"))
        .expect("some seed yields a connected graph")
}

/// Deterministic vector of length `len` with entries in `[0, 1)`.
pub fn test_vector(len: usize) -> Vec<f64> {
    (0..len).map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0).collect()
}
