use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid problem parameters: {0}")]
    InvalidProblem(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("Newton did not converge at time step {step} after {iterations} iterations (residual {residual:e})")]
    NewtonFailure {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("non-positive curvature {curvature:e} at CG iteration {iteration}; H + γI is not positive definite")]
    NonPositiveCurvature { iteration: usize, curvature: f64 },

    #[error("CG stopped after {iterations} iterations with residual {residual:e} above target {target:e}")]
    CgNotConverged {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("predicted decrease {0:e} is not positive")]
    NonPositivePrediction(f64),

    #[error("dense oracle would need {entries} entries (limit {limit})")]
    OracleSizeLimit { entries: usize, limit: usize },
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
