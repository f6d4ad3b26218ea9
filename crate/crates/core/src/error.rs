use thiserror::Error;

/// Errors surfaced by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates one of its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An operation was called in a state that does not allow it.
    #[error("usage error: {0}")]
    Usage(String),
    /// A NaN/Inf or an otherwise degenerate number was produced.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Input data cannot support the requested analysis.
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn usage_err(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn numeric_err(msg: impl Into<String>) -> Error {
    Error::Numeric(msg.into())
}
