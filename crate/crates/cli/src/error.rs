use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Data(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 1,
            Self::Io { .. } => 2,
            Self::Data(_) => 3,
        }
    }
}

impl From<blocktext::Error> for CliError {
    fn from(e: blocktext::Error) -> Self {
        match e {
            blocktext::Error::InvalidArgument(msg) => Self::Usage(msg),
            blocktext::Error::Io(source) => Self::Io { path: "<io>".into(), source },
            other => Self::Data(other.to_string()),
        }
    }
}
