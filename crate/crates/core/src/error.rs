use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not unitary (max |U^dag U - I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("mode index {index} out of range for {modes} modes")]
    ModeIndex { index: usize, modes: usize },

    #[error("unsupported photon configuration: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("recurrence diverged at step {step} (|y| = {value:.3e})")]
    Divergence { step: usize, value: f64 },

    #[error("optimisation failed: {0}")]
    Optimization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
