use std::path::PathBuf;

/// Errors raised across the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("subject {index} with time {time} lies outside the grid (top cut {top})")]
    Assignment { index: usize, time: f64, top: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),

    #[error("degenerate exposure: event subject {0} has zero exposure fraction")]
    DegenerateExposure(usize),

    #[error("censored subject {0} falls in the final interval and has no survival tail")]
    TailDefinition(usize),

    #[error("non-finite value at sample {index}: {what}")]
    NonFinite { index: usize, what: String },

    #[error("base scores are not risk-set separable: event {event} does not dominate {other}")]
    Separability { event: usize, other: usize },

    #[error("epsilon {0} is outside the small-loss regime (0, ln 2]")]
    OutOfRegime(f64),

    #[error("margin {0} is not positive")]
    NoMargin(f64),

    #[error("margin undefined: no event subjects")]
    UndefinedMargin,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("cannot render chart: {0}")]
    EmptyChart(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
