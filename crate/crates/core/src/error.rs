// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("index ({k}, {l}) out of range for base dimension {n} (indices are 1-based)")]
    Index { k: usize, l: usize, n: usize },

    #[error("vertex {vertex} is isolated; the simple random walk is undefined there")]
    DegenerateGraph { vertex: usize },

    #[error("transition matrix is reducible; no unique stationary distribution")]
    NoUniqueStationary,

    /// The killed pair system is singular: some pair of walkers never meets.
    #[error("expected meeting time is infinite (condition estimate {condition:e}, period {})",
        period.map_or_else(|| "n/a".to_string(), |p| p.to_string()))]
    InfiniteMeetingTime { condition: f64, period: Option<usize> },

    #[error("iterative solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension n = {n} exceeds the dense threshold {threshold}")]
    SizeLimit { n: usize, threshold: usize },

    #[error("inconsistent input: {0}")]
    Inconsistency(String),

    #[error("singular vector recovery failed: perturbed and unperturbed vectors are orthogonal")]
    RecoveryFailure,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Dimension { expected, actual })
        }
    }
}
