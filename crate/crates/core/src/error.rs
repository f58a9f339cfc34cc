use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum VrmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {left} vs {right} points")]
    SizeMismatch { left: usize, right: usize },

    #[error("distribution `{0}` has no analytic CDF")]
    NoAnalyticCdf(&'static str),

    /// A documented precondition of the operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, VrmError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(VrmError::InvalidParameter(msg.into()))
}
