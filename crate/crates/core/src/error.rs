use thiserror::Error;

/// Errors raised by the simulation kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("derivative order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("surface slope {max_slope:.3e} exceeds the hard bound {bound:.3e}")]
    SlopeTooLarge { max_slope: f64, bound: f64 },

    #[error("concentration must be strictly positive (min = {min:.6e})")]
    InvalidConcentration { min: f64 },

    #[error("argument {x} outside the tension model's validity window [0, {upper})")]
    OutOfRange { x: f64, upper: f64 },

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("flattening map is degenerate (min J = {min_j:.6e})")]
    DegenerateMap { min_j: f64 },

    #[error("linear system for mode ({0}, {1}) is singular")]
    SingularMode(i64, i64),

    #[error("incompatible data: {0}")]
    IncompatibleData(String),

    #[error("compatibility fixed point did not converge after {iterations} iterations (last update {last_update:.3e})")]
    CompatibilityFailed { iterations: usize, last_update: f64 },

    #[error("decay fit needs strictly positive samples (found {value:.6e} at t = {t})")]
    FitDomainError { t: f64, value: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
