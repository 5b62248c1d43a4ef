use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EdpaError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole at {location}")]
    Pole { location: f64 },
    #[error("series not converged after {terms} terms (residual bound {residual:e})")]
    Accuracy { residual: f64, terms: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("step failure at t = {time} (min gap {gap:e})")]
    StepFailure { time: f64, gap: f64 },
}

pub type Result<T> = std::result::Result<T, EdpaError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(EdpaError::Domain(msg.into()))
}
