use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports.
///
/// The variants group into the exit-code classes used by the command-line
/// front end: usage errors, data/format errors, and constraint violations.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates a documented constraint.
    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// The configuration file could not be parsed (unknown key, wrong type).
    #[error("cannot parse configuration {}: at `{key}`: {msg}", path.display())]
    ConfigParse {
        path: PathBuf,
        key: String,
        msg: String,
    },

    /// Input data does not satisfy an operation's precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// Numerical processing produced or received a non-finite value.
    #[error("processing error: {0}")]
    Processing(String),

    /// An API was called in the wrong state (for example an untrained model).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("unsupported audio format in {}: {msg}", path.display())]
    UnsupportedFormat { path: PathBuf, msg: String },

    /// A persisted file is malformed.
    #[error("format error in {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("{} was written by format version {found}, this build reads version {supported}", path.display())]
    Version {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("checksum mismatch in {}", path.display())]
    Checksum { path: PathBuf },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
