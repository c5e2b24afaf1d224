use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty input")]
    EmptyInput,
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("too many clusters: label {label} with only {allowed} allowed")]
    TooManyClusters { label: usize, allowed: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
