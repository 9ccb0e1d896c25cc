use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain validation failed: {0}")]
    Domain(String),

    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("spectral field is not Hermitian: relative deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    Symmetry { deviation: f64, tolerance: f64 },

    #[error("source is singular at t = {t}")]
    Singularity { t: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e}")]
    Accuracy { estimate: f64, error: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short name of the variant, for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "domain",
            Self::Shape { .. } => "shape",
            Self::Symmetry { .. } => "symmetry",
            Self::Singularity { .. } => "singularity",
            Self::Config(_) => "config",
            Self::Accuracy { .. } => "accuracy",
            Self::Consistency(_) => "consistency",
            Self::Range(_) => "range",
            Self::UndefinedMetric(_) => "undefined_metric",
            Self::Io(_) => "io",
            Self::Csv(_) => "csv",
            Self::Toml(_) => "config_parse",
            Self::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
