use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// The requested quantity needs an ML mean estimate that does not exist
    /// (all relevant outcomes are zero, and 0 is outside the open parameter
    /// space).
    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    /// A codelength evaluated to a non-finite value.
    #[error("numeric overflow: {0}")]
    NumericOverflow(&'static str),

    /// The operation is defined but deliberately not supported.
    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An experiment configuration failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Inconsistent internal state; indicates a bug, not bad input.
    #[error("internal error: {0}")]
    Internal(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
