//! Error type shared by every module of the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// File system failure while reading or writing an artifact.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed cell or row in a CSV file. Row and column are 1-based.
    #[error("parse error in {path} at row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    /// A precondition on the inputs does not hold (empty class, bad
    /// dimension, out-of-range parameter, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A trained model came out unusable (vanishing normal vector or
    /// non-positive decision denominator).
    #[error("degenerate model: {0}")]
    Degenerate(String),

    /// The coordinate-descent solver did not reach the termination gap.
    #[error("solver did not converge within {epochs} epochs (gap {gap:.3e} > eps {epsilon:.3e})")]
    NonConvergence { epochs: usize, gap: f64, epsilon: f64 },

    /// Every jitter level in the schedule failed to produce a usable
    /// factorization.
    #[error("factorization failed at every jitter level: {0}")]
    Factorization(String),

    /// Model (de)serialization failure.
    #[error("model serialization: {0}")]
    Serialization(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
