use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification of failures, used by front ends to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input files or parameters.
    Validation,
    /// A numerical solve failed.
    Solver,
    /// The seen/unseen experimental contract was violated.
    Protocol,
}

#[derive(Debug, Error)]
pub enum ZshError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: empty input")]
    Empty { context: String },

    #[error("{context}: row {row}: expected {expected} values, found {found}")]
    RaggedRow {
        context: String,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{context}: row {row}: non-finite value in column {column}")]
    NonFinite {
        context: String,
        row: usize,
        column: usize,
    },

    #[error("{context}: row {row}: {message}")]
    Parse {
        context: String,
        row: usize,
        message: String,
    },

    #[error("duplicate identifier {id:?} ({context})")]
    Duplicate { context: String, id: String },

    #[error("embedding for {token:?} is the zero vector and cannot be normalized")]
    ZeroVector { token: String },

    #[error("labels missing from the embedding table: {}", .labels.join(", "))]
    MissingLabels { labels: Vec<String> },

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported {what} version {found} (expected {expected})")]
    Version {
        what: &'static str,
        found: u32,
        expected: u32,
    },

    #[error("truncated {what} file")]
    Truncated { what: &'static str },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("singular system in {block} update: {hint}")]
    Singular {
        block: &'static str,
        hint: &'static str,
    },

    #[error("non-finite objective after the {block} update")]
    NonFiniteObjective { block: &'static str },

    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl ZshError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ZshError::Singular { .. } | ZshError::NonFiniteObjective { .. } => ErrorKind::Solver,
            ZshError::Protocol(_) => ErrorKind::Protocol,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ZshError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        ZshError::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ZshError>;
