use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum IsoError {
    /// Invalid argument values or out-of-range indices.
    #[error("domain error: {0}")]
    Domain(String),
    /// A guard on problem size was exceeded (e.g. vertex cap for set enumeration).
    #[error("capacity error: {0}")]
    Capacity(String),
    /// The supplied graph is not a DAG or refers to unknown vertices.
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    /// A supplied vertex set violates its closure property.
    #[error("invalid set: {0}")]
    InvalidSet(String),
    /// An internal consistency check failed (a bug, not a user error).
    #[error("internal consistency error: {0}")]
    Internal(String),
    /// A text format could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, IsoError>;

impl IsoError {
    pub fn domain(msg: impl Into<String>) -> Self {
        IsoError::Domain(msg.into())
    }
}
