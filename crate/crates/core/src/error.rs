use thiserror::Error;

use crate::models::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("matrix is not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("weights must be non-negative and sum to 1: {0}")]
    WeightNormalization(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("rate evaluation failed at t = {t}: {message}")]
    RateEvaluation { t: f64, message: String },

    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: String, message: String },

    #[error("generator family does not commute (normalized residual {0:.3e})")]
    NonCommuting(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("{what} failed verification (residual {residual:.3e})")]
    Verification { what: String, residual: f64 },

    #[error("positivity lost at step {step} (t = {t}, min eigenvalue {min_eigenvalue:.3e}); try a smaller step")]
    PositivityViolation {
        step: usize,
        t: f64,
        min_eigenvalue: f64,
    },

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}
