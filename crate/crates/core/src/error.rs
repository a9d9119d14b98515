//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Array or matrix dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A matrix inverse or least-squares solve failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The channel matrix is (numerically) rank deficient.
    #[error("rank-deficient channel matrix (condition number {cond:.3e})")]
    RankDeficient { cond: f64 },

    /// A scenario configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Filesystem trouble while writing results.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
