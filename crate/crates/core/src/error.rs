use thiserror::Error;

/// Errors raised across the lab.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration value (sample count, grid size, ...) is unusable.
    #[error("config error: {0}")]
    Config(String),
    /// The geometric configuration is degenerate (zero wedge norms, oversized caps, ...).
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    /// A documented precondition of an experiment does not hold.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// An exponent scenario violates the regime exclusivity rules.
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
