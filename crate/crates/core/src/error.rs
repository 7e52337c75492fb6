use thiserror::Error;

/// Errors raised across the synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("cannot factor monomial {monomial} over the reduced basis")]
    Factorization { monomial: String },

    #[error("invalid degree range [{dmin}, {dmax}]")]
    DegreeRange { dmin: u32, dmax: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("method {method} cannot be used here: {reason}")]
    MethodMismatch { method: String, reason: String },

    #[error("trajectory diverged at t = {time:.6} (|x| = {norm:.3e})")]
    Divergence { time: f64, norm: f64 },

    #[error("data format error: {0}")]
    Format(String),

    #[error("matrix polynomial is not symmetric at entry ({row}, {col})")]
    NonSymmetric { row: usize, col: usize },

    #[error("equality system is inconsistent (residual {residual:.3e})")]
    StructuralInfeasibility { residual: f64 },

    #[error("certificate is ill-conditioned: cond(P) = {cond:.3e}; raise rho")]
    IllConditioned { cond: f64 },

    #[error("certificate check failed: {0}")]
    InvalidCertificate(String),

    #[error("solver did not return a feasible point: {0}")]
    NotFeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
