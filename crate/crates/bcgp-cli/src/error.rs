//! CLI error taxonomy mapped onto process exit codes:
//! 0 success, 2 config error, 3 data/file error, 4 numeric error.

use bcgp::{DataError, GpError, ModelError, OptimizeError, WarpError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("file error: {0}")]
    Io(String),
    #[error("numeric error: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<GpError> for CliError {
    fn from(e: GpError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<WarpError> for CliError {
    fn from(e: WarpError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        CliError::Numeric(e.to_string())
    }
}
