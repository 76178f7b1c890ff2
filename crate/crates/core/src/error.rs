use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the propagator engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spin: 2j = {0} is not a positive integer")]
    InvalidSpin(f64),

    #[error("pole of the metric: 1 + z*zbar = {value} (z = {z}, zbar = {zbar})")]
    Pole {
        z: Complex64,
        zbar: Complex64,
        value: Complex64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("representation dimension {dim} exceeds the configured limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("hamiltonian matrix is not hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("step size underflow at t = {t} (h = {h:e}); last state z = {z}, zbar = {zbar}")]
    StepUnderflow {
        t: f64,
        h: f64,
        z: Complex64,
        zbar: Complex64,
    },

    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("newton iteration stalled after {iterations} iterations (|F| = {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("caustic: |M_zbarzbar| = {m:e} below the rejection threshold")]
    Caustic { m: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
