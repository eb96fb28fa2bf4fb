use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("characteristic point: horizontal gradient norm {norm:e} below tolerance {tol:e}")]
    Characteristic { norm: f64, tol: f64 },

    #[error("Euclidean gradient vanishes (norm {norm:e})")]
    ZeroGradient { norm: f64 },

    #[error("time step {dt:e} exceeds the CFL limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite value produced at node {node} (time {time})")]
    NonFinite { node: usize, time: f64 },

    #[error("top eigenvalue gap {gap:e} is too small")]
    EigenGap { gap: f64 },

    #[error("control direction is not a unit vector (norm {0})")]
    NonUnitDirection(f64),

    #[error("point lies outside the grid: {0:?}")]
    OutsideGrid(Vec<f64>),

    #[error("policy search produced no valid policy")]
    NoPolicy,
}

pub type Result<T> = std::result::Result<T, Error>;
