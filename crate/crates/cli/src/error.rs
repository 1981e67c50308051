use spectral_copula::CopulaError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("infeasible model: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 input, 3 convergence, 4 infeasible.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl From<CopulaError> for CliError {
    fn from(e: CopulaError) -> Self {
        match e {
            CopulaError::Convergence { .. } => CliError::Convergence(e.to_string()),
            CopulaError::Infeasible { .. } | CopulaError::Degenerate { .. } | CopulaError::FilterDivergence { .. } => {
                CliError::Infeasible(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(format!("json: {e}"))
    }
}
