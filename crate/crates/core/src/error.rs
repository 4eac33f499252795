use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("head layout mismatch: {0}")]
    Layout(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("missing prerequisite artifact {path}: run `{stage}` first")]
    MissingPrerequisite { path: PathBuf, stage: &'static str },

    #[error("config hash mismatch: {artifact} was produced with config {found}, current config is {expected}")]
    ConfigMismatch {
        artifact: PathBuf,
        expected: String,
        found: String,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ConfigMismatch { .. } => 2,
            Error::MissingPrerequisite { .. } => 3,
            Error::NonFinite(_) => 4,
            _ => 1,
        }
    }
}

pub(crate) fn ensure_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
