use thiserror::Error;

#[derive(Debug, Error)]
pub enum HypError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{what}: no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },
    #[error("unresolved grid: {0}")]
    Resolution(String),
    #[error("parameter gate violated: {0}")]
    ParameterGate(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HypError>;

impl HypError {
    /// Whether the error stems from user input rather than from the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HypError::InvalidInput(_) | HypError::ParameterGate(_) | HypError::Domain(_)
        )
    }
}
