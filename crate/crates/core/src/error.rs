use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FolError>;

#[derive(Debug, Error)]
pub enum FolError {
    /// Bad user input or violated precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Two inputs that must agree (grid sizes, sample ids, lengths) do not.
    #[error("data mismatch: {0}")]
    Mismatch(String),

    /// Singular systems, non-finite losses or gradients.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl FolError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        FolError::Invalid(msg.into())
    }

    pub fn mismatch(msg: impl Into<String>) -> Self {
        FolError::Mismatch(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        FolError::Numerical(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FolError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        FolError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            FolError::Invalid(_) | FolError::Io { .. } | FolError::Parse { .. } => 2,
            FolError::Mismatch(_) => 3,
            FolError::Numerical(_) => 4,
        }
    }
}
