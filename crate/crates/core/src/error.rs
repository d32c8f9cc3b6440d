use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid range: t = {t} precedes s = {s}")]
    InvalidRange { t: usize, s: usize },
    #[error("bregman divergence undefined: y[{index}] = 0 while x[{index}] > 0")]
    DivergenceUndefined { index: usize },
    #[error("unsupported combination: {geometry} geometry with {regularizer} regularizer")]
    UnsupportedCombination {
        geometry: &'static str,
        regularizer: &'static str,
    },
    #[error("invalid stepsize {0}; must be positive and finite")]
    InvalidStepsize(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point outside the domain: {0}")]
    Domain(String),
    #[error("kappa estimation failed: {0}")]
    EstimationFailed(String),
    #[error("reference solver failed after {iterations} iterations (residual {residual:e})")]
    SolverFailed { iterations: usize, residual: f64 },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("series misaligned: {0}")]
    Alignment(String),
    #[error("trial count mismatch: expected {expected}, got {got}")]
    TrialCount { expected: usize, got: usize },
    #[error("rate fit undefined: {0}")]
    FitDomain(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by how the program was invoked rather than by a
    /// failure during execution.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_) | Error::Config(_))
    }
}
