use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix dimension must be at least 1")]
    EmptyDimension,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input contains NaN or infinite entries")]
    NonFinite,

    /// QR iteration hit its sweep cap. `deflated` holds the eigenvalues (re, im)
    /// that had already split off; `active` is the unreduced window.
    #[error("eigenvalue iteration did not converge after {sweeps} sweeps (active block {active:?})")]
    NoConvergence {
        sweeps: usize,
        deflated: Vec<(f64, f64)>,
        active: (usize, usize),
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("adaptive quadrature failed to reach tolerance {tol:e} (estimate {estimate}, error {error:e})")]
    Quadrature { tol: f64, estimate: f64, error: f64 },

    #[error("point ({0}, {1}) lies outside the square (-1, 1]^2")]
    OutsideUnitSquare(f64, f64),
}

pub type Result<T> = std::result::Result<T, Error>;
