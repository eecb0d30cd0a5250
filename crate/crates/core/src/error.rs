use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quadratic form is degenerate (smallest |eigenvalue| {min_abs_eigenvalue:e})")]
    DegenerateForm { min_abs_eigenvalue: f64 },
    #[error("covector is zero")]
    ZeroCovector,
    #[error("gradient vanishes at point (|grad| = {grad_norm:e})")]
    SingularPoint { grad_norm: f64 },
    #[error("point is the origin")]
    ZeroPoint,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ODE integration failed at z = {z}: {reason}")]
    IntegratorFailure { z: f64, reason: String },
    #[error("no reliable kernel vector for the obstruction system ({0}); increase the basis size")]
    NoKernelVector(String),
    #[error("z = {z} outside the sampled range [{lo}, {hi}]")]
    OutOfRange { z: f64, lo: f64, hi: f64 },
    #[error("division by near-zero value {value:e} at z = {z}")]
    DivisionNearZero { z: f64, value: f64 },
    #[error("invalid support function: {0}")]
    InvalidSupport(String),
    #[error("support field grids differ: {0}")]
    GridMismatch(String),
    #[error("glued field is not convex in z (margin {margin:e} at z = {z}, theta = {theta})")]
    GlueConvexityFailure { margin: f64, z: f64, theta: f64 },
    #[error("input field does not extend far enough for the kernel window: {0}")]
    InsufficientMargin(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("stage `{stage}` failed: {source}; hint: {hint}")]
    Stage {
        stage: &'static str,
        hint: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str, hint: &'static str) -> Self {
        Error::Stage { stage, hint, source: Box::new(self) }
    }
}
