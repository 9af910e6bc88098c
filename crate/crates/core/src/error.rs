use thiserror::Error;

/// Errors produced anywhere in the selection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        op: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("norm power p = {0} is outside (0, 2]")]
    InvalidPower(f64),

    #[error("singular value decomposition did not converge")]
    SvdFailure,

    #[error("linear system is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("class id {id} is outside 1..={class_count}")]
    UnknownClass { id: usize, class_count: usize },

    #[error("design matrix has rank zero")]
    ZeroRank,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("feature count d = {d} is outside 1..={available}")]
    FeatureCount { d: usize, available: usize },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("stratified split needs at least 2 samples per class; class {class} has {count}")]
    Stratification { class: usize, count: usize },

    #[error("run failed for p = {p}: {source}")]
    SweepFailed {
        p: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
