//! Crate-wide error type.
//!
//! Two broad classes matter to callers: bad inputs (`Validation`, `Parse`)
//! and failures that occur after inputs were accepted (`Io`, `Numeric`).
//! The CLI maps the first class to exit code 1 and the second to exit code 2.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller-supplied data violated a precondition (bad shape, bad label,
    /// bad parameter value).
    #[error("{0}")]
    Validation(String),

    /// A computation failed numerically (NaN loss, domain error).
    #[error("{0}")]
    Numeric(String),

    /// Filesystem failure while reading or writing an artifact.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file existed but a specific line could not be interpreted.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by caller input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_) | Error::Parse { .. })
    }
}
