use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("structural error: {0}")]
    Structure(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("kernel evaluated at coincident points")]
    SingularEvaluation,

    #[error("quadrature configuration: {0}")]
    Quadrature(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Iterative and direct solver failures. Iterative variants carry the
/// residual history recorded up to the failure.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{method} did not converge in {iterations} iterations (last residual {last_residual:.3e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        last_residual: f64,
        history: Vec<f64>,
    },

    #[error("{method} breakdown: {reason}")]
    Breakdown {
        method: &'static str,
        reason: String,
        history: Vec<f64>,
    },

    #[error("relaxed Jacobi diverged for sigma = {sigma} after {iterations} iterations")]
    Diverged {
        sigma: f64,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("matrix is singular to working precision")]
    Singular,
}

impl SolverError {
    pub fn history(&self) -> &[f64] {
        match self {
            SolverError::NotConverged { history, .. }
            | SolverError::Breakdown { history, .. }
            | SolverError::Diverged { history, .. } => history,
            SolverError::Singular => &[],
        }
    }
}
