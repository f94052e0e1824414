//! CLI error type and the exit-code mapping.
//!
//! Exit codes: 0 success, 2 retrain required, 3 input/validation error,
//! 4 numeric/convergence error.

use thiserror::Error;
use unlearn_core::Error as CoreError;

pub const EXIT_RETRAIN_REQUIRED: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("{0}")]
    Validation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("model file error: {0}")]
    ModelFile(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::Numeric(_)) | CliError::Core(CoreError::Convergence { .. }) => {
                EXIT_NUMERIC
            }
            _ => EXIT_VALIDATION,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
