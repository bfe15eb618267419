use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: &'static str, expected: usize, found: usize },

    #[error("invalid probability table in {context}: {detail}")]
    InvalidProbability { context: &'static str, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stationary distribution did not converge after {iterations} iterations (residual {residual:e}); chain may be reducible/periodic")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("chain has {classes} closed classes; a unique stationary distribution needs exactly one")]
    Reducible { classes: usize },

    #[error("insufficient state coverage: X^T D X is singular")]
    InsufficientCoverage,

    #[error("agent cannot identify solution alone: B = X^T D (I - gamma P) X is singular")]
    SingularSystem,

    #[error("feature matrix is rank deficient (rank {rank} < {expected}); consider a larger basis width")]
    RankDeficient { rank: usize, expected: usize },

    #[error("target policy not absolutely continuous w.r.t. behavior at state {state}, action {action}")]
    SupportViolation { state: usize, action: usize },

    #[error("network graph is disconnected")]
    Disconnected,

    #[error("combination matrix is not primitive")]
    NotPrimitive,

    #[error("combination matrix invalid: {0}")]
    InvalidCombination(String),

    #[error("mean recursion unstable: spectral radius {rho}")]
    MeanUnstable { rho: f64 },

    #[error("mean-square unstable: spectral radius of F is {rho}")]
    MeanSquareUnstable { rho: f64 },

    #[error("sample-space enumeration of size {size} exceeds cap {cap}")]
    EnumerationTooLarge { size: usize, cap: usize },

    #[error("matrix of dimension {dim} exceeds the configured cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
