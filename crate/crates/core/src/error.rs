use thiserror::Error;

/// Errors raised by the selection, estimation and data routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SskError {
    #[error("invalid selection: {0}")]
    InvalidSelection(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("singular system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("inner system singular at iteration {iteration} (gamma = {gamma})")]
    SolverBreakdown { gamma: f64, iteration: usize },

    #[error("no sensor survived thresholding")]
    EmptySelection,

    #[error("barrier domain violated: {0}")]
    BarrierDomain(String),

    #[error("line search stalled after {steps} Newton steps (decrement {decrement:e}, step {step:e})")]
    StalledDescent {
        steps: usize,
        decrement: f64,
        step: f64,
    },

    #[error("ingestion failed: {0}")]
    Ingestion(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SskError {
    fn from(e: std::io::Error) -> Self {
        SskError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SskError>;
