use num_complex::Complex64;
use thiserror::Error;

use crate::solver::NvState;

pub type Result<T> = std::result::Result<T, NvError>;

#[derive(Debug, Error)]
pub enum NvError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("NON_CONVERGED: {context} (stabilization error {stab_err:.3e} exceeds tolerance {tol:.3e})")]
    NonConverged {
        context: String,
        value: Complex64,
        stab_err: f64,
        tol: f64,
    },

    #[error("NAN_DETECTED at t = {t}")]
    NanDetected { t: f64, last_state: Box<NvState> },

    #[error("resolution check failed: {0}")]
    Resolution(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(NvError::Precondition(msg()))
    }
}

pub(crate) fn require_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(NvError::InvalidInput(format!("{name} must be finite, got {x}")))
    }
}
