//! Error type shared across the crate.
//!
//! Two families matter to callers: configuration problems (bad parameters,
//! dimension mismatches) and data problems (unreadable or malformed input,
//! non-finite values). The bench binary maps them to distinct exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is out of its documented range (k = 0, ε ≤ 0, bad window, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Row or matrix dimensions disagree with the state they are fed to.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An input value is NaN or infinite.
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    /// Malformed stream data (ragged CSV row, unparsable cell), with the
    /// 1-based line number of the offending record.
    #[error("ingestion error at line {line}: {msg}")]
    Ingestion { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(#[from] serde_json::Error),

    /// A numerical routine failed where the preconditions say it cannot
    /// (e.g. a ridge-regularized solve losing positive definiteness).
    #[error("internal numerical error: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by how the run was configured, as opposed to
    /// what the data contained.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
