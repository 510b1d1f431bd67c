//! Crate-wide error type and exit-code mapping for the CLI.

use std::path::PathBuf;

use thiserror::Error;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A function precondition was violated by the caller.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A configuration file could not be parsed or failed validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Filesystem failure, annotated with the path involved.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    /// A NaN or infinity appeared where finite values are required.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn invalid_config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code contract: 1 invalid config/arguments, 2 I/O,
    /// 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::InvalidConfig(_) => 1,
            Error::Io { .. } | Error::Csv(_) => 2,
            Error::Numerical(_) => 3,
        }
    }
}
