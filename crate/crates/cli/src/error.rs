use std::io;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { key: String, line: usize },

    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { text: String, line: usize },

    #[error("{key} = {value:?}: {reason}")]
    BadValue { key: String, value: String, reason: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Core(#[from] finmc::Error),
}

/// Stable process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Runtime,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Runtime => 2,
            ErrorKind::Io => 3,
        }
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        use finmc::Error as E;
        match self {
            CliError::UnknownKey { .. }
            | CliError::Syntax { .. }
            | CliError::BadValue { .. }
            | CliError::Invalid(_) => ErrorKind::Validation,
            CliError::Io { .. } => ErrorKind::Io,
            CliError::Core(e) => match e {
                E::InvalidMesh(_) | E::InvalidParameter { .. } => ErrorKind::Validation,
                E::Io(_) | E::Checkpoint(_) | E::Parse(_) => ErrorKind::Io,
                _ => ErrorKind::Runtime,
            },
        }
    }

    pub fn record(&self) -> ErrorRecord {
        let kind = self.kind();
        ErrorRecord {
            kind,
            exit_code: kind.exit_code(),
            message: self.to_string(),
        }
    }
}

/// Machine-readable failure report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub kind: ErrorKind,
    pub exit_code: i32,
    pub message: String,
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
