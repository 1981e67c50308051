use thiserror::Error;

pub type Result<T> = std::result::Result<T, CopulaError>;

/// Errors raised by the copula library.
///
/// The optimizer relies on the distinction between [`CopulaError::Infeasible`] /
/// [`CopulaError::FilterDivergence`] (a rejected parameter point) and every
/// other variant (a genuine failure).
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CopulaError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate spectral state: diag(Sigma)[{index}] = {value:e}")]
    Degenerate { index: usize, value: f64 },

    #[error("implied dependence matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    Infeasible { min_eigenvalue: f64 },

    #[error("filter diverged at t = {t}: {reason}")]
    FilterDivergence { t: usize, reason: String, f: Vec<f64> },

    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("optimizer failed to converge: {message}")]
    Convergence { message: String, best: Vec<f64>, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl CopulaError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        CopulaError::Domain(msg.into())
    }

    /// True for errors that mean "this parameter point is not admissible".
    pub fn is_rejection(&self) -> bool {
        matches!(
            self,
            CopulaError::Infeasible { .. }
                | CopulaError::FilterDivergence { .. }
                | CopulaError::Degenerate { .. }
        )
    }
}
