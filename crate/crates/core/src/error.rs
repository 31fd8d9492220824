use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two elements, or an element and a poset, disagree on their parameters.
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    /// An element violates the invariants of its family.
    #[error("invalid element: {0}")]
    InvalidElement(String),
    /// A path certificate does not chain covers from the least element.
    #[error("broken path certificate: {0}")]
    BrokenPath(String),
    /// The requested family has no join.
    #[error("no join: {0}")]
    NoJoin(String),
    /// A brute-force or explicit construction would exceed a hard cap.
    #[error("size guard exceeded: {what} (limit {limit})")]
    TooLarge { what: String, limit: usize },
    /// Argument outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Data that cannot support the requested computation.
    #[error("degenerate data: {0}")]
    Degenerate(String),
    /// Malformed text or tabular input.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::ParameterMismatch(msg.into())
}
