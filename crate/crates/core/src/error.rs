use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// The estimator's denominator vanished to machine precision.
    #[error("overflow: {0}")]
    Overflow(String),

    /// The conditional risk has no finite minimizer (an expert accuracy of
    /// exactly 0 or 1, or a zero class posterior).
    #[error("boundary: {0}")]
    Boundary(String),

    #[error(
        "minimizer did not converge after {iterations} iterations (gradient norm {grad_norm:e})"
    )]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Diverged { epoch: usize, batch: usize },
}

impl Error {
    /// Short machine-readable tag, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::Overflow(_) => "overflow",
            Error::Boundary(_) => "boundary",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Diverged { .. } => "diverged",
        }
    }
}
