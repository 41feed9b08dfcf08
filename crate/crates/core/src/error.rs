use thiserror::Error;

/// Errors produced by the numerics and by spec parsing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid usage: unknown names, bad parameter combinations, empty samples.
    #[error("usage error: {0}")]
    Usage(String),

    /// A documented precondition of an operation does not hold for the input.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A user-supplied set function broke the capacity contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A function or capacity spec could not be parsed.
    #[error("invalid spec: {0}")]
    Spec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
