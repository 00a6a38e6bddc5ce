//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("unknown field kind `{0}`")]
    UnknownKind(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numeric range error: {0}")]
    NumericRange(String),

    #[error("time {t} is not aligned to the grid with step {delta}")]
    GridAlignment { t: f64, delta: f64 },

    #[error("window violation: index {index} outside [{k_min}, {k_max}]")]
    WindowViolation { index: i64, k_min: i64, k_max: i64 },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("Newton iteration diverged at step {step} after {iters} iterations (residual {residual:.3e})")]
    NewtonDiverged { step: usize, iters: usize, residual: f64 },

    #[error("trajectory exploded at step {step} (t = {t}): state norm exceeded {threshold:.1e}")]
    Explosion { step: usize, t: f64, threshold: f64 },

    #[error("QR breakdown at step {step}: rank-deficient tangent frame")]
    QrBreakdown { step: usize },

    #[error("eigenvalue solver failed: {0}")]
    Eigen(String),

    #[error("field `{0}` is not gradient-type (no potential available)")]
    NonGradient(String),

    #[error("quadrature error: {0}")]
    Quadrature(String),

    #[error("density is not integrable on any tested box: {0}")]
    NonIntegrable(String),

    #[error("separation underflow in two-point exponent (increase delta0)")]
    SeparationUnderflow,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("expression parse error: {0}")]
    Expr(String),

    #[error("control horizon t0 = {t0} exceeds the admissible bound T0 = {t_max:.6}")]
    ControlHorizon { t0: f64, t_max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::UnknownKind(_)
            | Error::Expr(_)
            | Error::InvalidWindow(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
