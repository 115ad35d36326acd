use thiserror::Error;

use crate::config::ConfigError;
use crate::dataset::IngestError;
use crate::task::TaskError;

/// Top-level failure, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("compute error: {0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Compute(_) => 4,
        }
    }

    pub fn compute(e: impl std::fmt::Display) -> CliError {
        CliError::Compute(e.to_string())
    }

    pub fn data(e: impl std::fmt::Display) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::EmptySplit(_) | TaskError::MissingEmbedding(_) => CliError::Data(e.to_string()),
            _ => CliError::Compute(e.to_string()),
        }
    }
}
