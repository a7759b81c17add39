//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors surfaced by dataset I/O, model fitting and evaluation.
#[derive(Debug, Error)]
pub enum Error {
    /// Schema construction or validation failure.
    #[error("schema: {0}")]
    Schema(String),

    /// CSV parse failure, pointing at the offending data row (1-based,
    /// header excluded).
    #[error("csv row {row}: {msg}")]
    Csv { row: usize, msg: String },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Configuration file or parameter problem.
    #[error("config: {0}")]
    Config(String),

    /// An operation was called with inputs violating its contract.
    #[error("{0}")]
    Invalid(String),

    /// A diagnostic cannot be computed on a degenerate chain.
    #[error("degenerate chain: {0}")]
    DegenerateChain(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
