use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the embedding library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dataset too small: need at least 2 points, got {n}")]
    DatasetTooSmall { n: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point {0} has no positive-weight edges")]
    IsolatedPoint(usize),

    #[error("degenerate density profile: variance of log radii is zero")]
    DegenerateDensity,

    #[error("numerical divergence at epoch {epoch} while updating pair ({i}, {j})")]
    NumericalDivergence { epoch: usize, i: usize, j: usize },

    #[error("eigensolver failed: {0}")]
    Eigen(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
