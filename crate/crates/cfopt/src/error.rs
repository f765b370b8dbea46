//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A context, decision or configuration failed validation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A context violated its feature-space schema.
    #[error("invalid context: {0}")]
    InvalidContext(String),

    /// Dimension of a vector does not match its schema.
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A model was built incorrectly (duplicate names, unknown variables, ...).
    #[error("model error: {0}")]
    Model(String),

    /// The optimization backend reported a failure.
    #[error("solver error: {0}")]
    Solver(String),

    /// The requested operation is not defined for this problem variant.
    #[error("unsupported problem variant: {0}")]
    UnsupportedVariant(String),

    /// File input/output failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON input.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed CSV input.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
