use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum SkewError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time {t} is outside the valid range (horizon {horizon})")]
    HorizonViolation { t: f64, horizon: f64 },

    #[error("non-finite value produced on path {path} at step {step}")]
    NonFinite { path: usize, step: usize },

    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {error}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
    },

    #[error("Fokker-Planck solver unstable at t={t}: {reason}")]
    Instability { t: f64, reason: String },

    #[error("too few samples: {got} (need at least {need})")]
    TooFewSamples { got: usize, need: usize },

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SkewError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SkewError {
    SkewError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
