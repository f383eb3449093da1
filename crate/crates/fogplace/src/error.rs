//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by the fogplace library.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data violates a precondition (empty input, bad range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Configuration is incomplete or inconsistent (missing tier range, bad key, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A byte stream could not be parsed in the declared format.
    #[error("format error: {0}")]
    Format(String),

    /// A referenced entity (node, region, slot) does not exist.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// Input is too degenerate for the requested operation (e.g. fewer
    /// distinct values than clusters).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Instance exceeds the limits of the requested solver.
    #[error("instance too large: {0}")]
    SizeLimit(String),

    /// An iterative fit ran out of budget; carries best-so-far diagnostics.
    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    /// Model training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    /// An internal invariant was violated; indicates a bug.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 usage/input, 3 infeasible or
    /// degenerate data, 4 internal invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Config(_)
            | Error::Format(_)
            | Error::Lookup(_)
            | Error::SizeLimit(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Degenerate(_) | Error::NonConvergence(_) | Error::Training { .. } => 3,
            Error::Internal(_) => 4,
        }
    }
}
