use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index ({i}, {j}) outside the table window")]
    OutsideWindow { i: i64, j: i64 },

    #[error("threshold crossing not unique in row {row}: last sub-threshold index {last_below}, first violation {first_above}")]
    NonUniqueCrossing {
        row: i64,
        last_below: i64,
        first_above: i64,
    },

    #[error("convexity budget exceeded: requested increase {requested} > {available} after rescale {rescale}")]
    BudgetExceeded {
        requested: f64,
        available: f64,
        rescale: f64,
    },

    #[error("invalid eigenvalue {lambda}: {reason}")]
    InvalidEigenvalue { lambda: i64, reason: &'static str },

    #[error("spectral parameter too close to the spectrum: distance {distance} < {floor}")]
    NearSpectrum { distance: f64, floor: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("support violation: {0}")]
    Support(String),

    #[error("metric not positive definite at t = {t}: smallest eigenvalue {min_eig}")]
    NotPositiveDefinite { t: f64, min_eig: f64 },

    #[error("singular Jacobian at t = {t}")]
    SingularJacobian { t: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
