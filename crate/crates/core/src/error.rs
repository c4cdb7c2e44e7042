use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: operand `{operand}` has shape {found:?}, expected {expected:?}")]
    Shape {
        op: &'static str,
        operand: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("backward: root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("adam: parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("corpus is empty: {0}")]
    EmptyCorpus(String),

    #[error("duplicate language `{code}` at line {line}")]
    DuplicateLanguage { code: String, line: usize },

    #[error("conflicting WALS values for ({language}, {feature}): `{first}` vs `{second}`")]
    ConflictingWals {
        language: String,
        feature: String,
        first: String,
        second: String,
    },

    #[error("feature `{0}` not found")]
    FeatureNotFound(String),

    #[error("feature `{feature}` unusable: {reason}")]
    UnusableFeature { feature: String, reason: String },

    #[error("unknown language `{0}`")]
    UnknownLanguage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
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

/// Coarse failure class, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Runtime,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Parse { .. }
            | Error::EmptyCorpus(_)
            | Error::DuplicateLanguage { .. }
            | Error::ConflictingWals { .. }
            | Error::FeatureNotFound(_)
            | Error::UnusableFeature { .. }
            | Error::UnknownLanguage(_)
            | Error::Checkpoint(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io { .. } => ErrorKind::Data,
            _ => ErrorKind::Runtime,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }
}
