use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error(
        "{solver} did not converge in {iterations} iterations (residual {residual:e}); report written to {report}"
    )]
    NotConverged {
        solver: String,
        iterations: usize,
        residual: f64,
        report: PathBuf,
    },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Process exit status: 2 for bad input, 3 for non-convergence, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 2,
            CliError::NotConverged { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// Attaches a config path to a library error. Field-level errors keep
    /// their own path below `section`.
    pub fn from_model(section: &str, err: powergame::Error) -> Self {
        match err {
            powergame::Error::Invalid { field, reason } if section.is_empty() => CliError::Validation { field, reason },
            powergame::Error::Invalid { field, reason } => CliError::Validation {
                field: format!("{section}.{field}"),
                reason,
            },
            other => CliError::Validation {
                field: section.to_string(),
                reason: other.to_string(),
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
