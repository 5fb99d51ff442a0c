use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must satisfy 3 <= n <= {max}, got {got}")]
    InvalidDimension { got: usize, max: usize },

    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite integrand value {value} at node {node:?}")]
    NonFinite { node: Vec<f64>, value: f64 },

    #[error("test function support (center {center:?}, radius {radius}) is not contained in the integration region")]
    SupportOutsideRegion { center: Vec<f64>, radius: f64 },

    #[error("sampled functions live on different cells ({left} vs {right} samples)")]
    MismatchedDomains { left: usize, right: usize },

    #[error("negative sample {value} cannot be raised to the non-integer power {alpha}")]
    NegativeFractionalPower { value: f64, alpha: f64 },

    #[error("sequence budget {budget} exceeded at k = {k}: measured {measured}")]
    BudgetExceeded { budget: f64, k: u32, measured: f64 },

    #[error("monotonicity quantity is non-positive ({value}) at r = {radius}")]
    Degenerate { radius: f64, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn ensure_positive(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive { what, value })
    }
}
