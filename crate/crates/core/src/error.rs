use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called with arguments outside its contract.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("integration blow-up in zone {zone} at t = {clock_min} min (step {step})")]
    IntegrationBlowup { zone: u32, clock_min: f64, step: u64 },

    #[error(
        "unstable explicit step for zone {zone}: dt*(conductance + m*cp)/C = {ratio:.3} exceeds {limit}"
    )]
    Unstable { zone: u32, ratio: f64, limit: f64 },

    #[error("training diverged: non-finite loss at train step {step}")]
    TrainingDivergence { step: u64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("weather format error: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// Innermost error, skipping context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
