use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum EctError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("potential solver did not converge after {sweeps} sweeps (max update {residual:.3e})")]
    Solver { sweeps: usize, residual: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("state error: {0}")]
    State(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("numerical error at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },

    #[error("landweber iteration diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EctError>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(EctError::Dimension { expected, got })
    }
}
