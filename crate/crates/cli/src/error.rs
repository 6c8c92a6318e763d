use std::path::PathBuf;

use thiserror::Error;

/// Failure categories, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead { path: PathBuf, source: std::io::Error },

    #[error("bad config {path}: {message}")]
    ConfigSchema { path: PathBuf, message: String },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] varboot::Error),

    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),

    #[error("cannot serialize output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use varboot::Error as E;
        match self {
            CliError::ConfigRead { .. } | CliError::ConfigSchema { .. } | CliError::Config(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::ParameterDomain(_) => 3,
                E::Parse { .. } | E::Validation(_) | E::Io(_) | E::Csv(_) | E::SampleTooSmall { .. } => 4,
                E::Numerical(_)
                | E::SingularDensity { .. }
                | E::IllConditioned { .. }
                | E::AllReplicatesFailed(_)
                | E::TooFewReplicates { .. } => 5,
            },
            CliError::Output(_) | CliError::Json(_) => 6,
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            3 => "config",
            4 => "data",
            5 => "numerical",
            _ => "output",
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
