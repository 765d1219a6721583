use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("non-finite value while evaluating `{subexpr}`")]
    Domain { subexpr: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("radial split undefined at the origin")]
    ZeroPoint,

    #[error("origin is not a critical point (gradient norm {grad_norm:e})")]
    NotCritical { grad_norm: f64 },

    #[error("symmetric eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("singular linear system")]
    Singular,

    #[error("newton iteration diverged after {iterations} steps (residual {residual:e})")]
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("point {norm:e} lies outside the newton basin radius {radius:e}")]
    OutsideBasin { norm: f64, radius: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("quadratic form {ratio} times the curvature scale exceeds the admissible range")]
    CurvatureExceeded { ratio: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("start point is already critical (gradient norm {grad_norm:e})")]
    CriticalStart { grad_norm: f64 },

    #[error("trajectory did not converge")]
    NotConverged,

    #[error("sample {index} lies at the origin")]
    SampleAtOrigin { index: usize },

    #[error("gauge fixing failed at sample {index}: {reason}")]
    GaugeFixFailed { index: usize, reason: String },

    #[error("gauge fixing did not converge after {iterations} iterations (residual {residual:e})")]
    GaugeNoConvergence { iterations: usize, residual: f64 },

    #[error("group action does not leave the field invariant (deviation {deviation:e})")]
    NotInvariant { deviation: f64 },

    #[error("time step fell below the floor {dt_floor:e}")]
    StepUnderflow { dt_floor: f64 },

    #[error("link logarithm outside the principal branch (scalar part {scalar})")]
    LogBranch { scalar: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
