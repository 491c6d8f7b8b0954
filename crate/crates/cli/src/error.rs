use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] skullnet::Error),

    /// A model, KNN or feature file that exists but cannot be decoded.
    #[error("corrupt file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use skullnet::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Format { .. } => EXIT_IO,
            CliError::Core(e) => match e {
                E::Io { .. } | E::Ingestion { .. } => EXIT_IO,
                E::Numeric(_) => EXIT_NUMERIC,
                E::InvalidShape(_)
                | E::Shape(_)
                | E::InvalidArgument(_)
                | E::Validation(_)
                | E::UndefinedMetric(_) => EXIT_USAGE,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
