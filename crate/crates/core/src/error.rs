//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by state constructors and dynamical operations.
///
/// Numeric payloads are widened to `f64` so the variants stay independent of
/// the scalar parameter.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not positive semi-definite (min eigenvalue {min_eigenvalue})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("operator trace is {trace}, expected 1")]
    InvalidTrace { trace: f64 },

    #[error("invalid partition: factor dims {dims:?} do not describe a {dim}-dimensional space")]
    BadPartition { dims: Vec<usize>, dim: usize },

    #[error("requested size {requested} exceeds the configured cap {cap}")]
    SizeCap { requested: usize, cap: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("potential step too large: max|V|*dt = {max_phase} > pi; shrink dt")]
    StepTooLarge { max_phase: f64 },

    #[error("trace drifted by {drift} in one master-equation step; shrink dt")]
    TraceDrift { drift: f64 },

    #[error("collapse weight vanished at the sampled center; event must be resampled")]
    ZeroNormCollapse,

    #[error("state matches both sector `{first}` and sector `{second}`; sector geometry is misconfigured")]
    AmbiguousSector { first: String, second: String },

    #[error("unitary evolution broke linearity (residual {residual}); apparatus construction is invalid")]
    LinearityViolation { residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
