//! Error type shared across the core.

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shape or length of an input does not match what the operation needs.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// An argument is out of its documented domain (zero dimension,
    /// non-positive learning rate, fold count larger than the prompt set).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Payload values violate the data contract (non-finite entries,
    /// unknown identifiers, scores off the rating scale).
    #[error("data error: {0}")]
    Data(String),

    /// A feature row has (near-)zero norm and cannot be normalized.
    #[error("degenerate feature: {0}")]
    Degenerate(String),

    /// A correlation coefficient is undefined on the given input.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    /// The run configuration is inconsistent with the data.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numeric quantity became non-finite.
    #[error("numerical failure in {tensor}: {reason}")]
    Numerical {
        tensor: String,
        reason: &'static str,
    },
}

pub type Result<T> = core::result::Result<T, Error>;
