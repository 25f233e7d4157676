use thiserror::Error;

/// Errors raised across the attribution, pricing and audit layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("insufficient {what}: need at least {needed}, got {got}")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("{n} features exceeds the exact-enumeration limit of {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("model evaluation failed at {point:?}: {reason}")]
    ModelEvaluation { point: Vec<f64>, reason: String },

    #[error("model provides no gradient; wrap it in FiniteDifference to run integrated gradients")]
    GradientUnavailable,

    #[error("training diverged at iteration {iteration} (loss = {loss})")]
    Divergence { iteration: usize, loss: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid records at lines {lines:?}: {message}")]
    Validation { lines: Vec<usize>, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
