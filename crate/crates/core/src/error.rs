use thiserror::Error;

/// Errors raised by the estimation, bootstrap and data layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter domain error: {0}")]
    ParameterDomain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("sample too small: need at least {required} observations, got {actual}")]
    SampleTooSmall { required: usize, actual: usize },

    #[error("density estimate at the quantile is zero; increase the bandwidth (h = {bandwidth})")]
    SingularDensity { bandwidth: f64 },

    #[error("information matrix is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("all {0} bootstrap replicates failed")]
    AllReplicatesFailed(usize),

    #[error("too few bootstrap replicates: need at least {required}, got {actual}")]
    TooFewReplicates { required: usize, actual: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
