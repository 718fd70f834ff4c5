use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    /// Carries the last iterate so callers can decide to keep it.
    #[error("accuracy error: {msg} (estimate {estimate:e})")]
    Accuracy {
        msg: String,
        estimate: f64,
        partial: (f64, f64),
    },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unsupported degeneracy: {0}")]
    Degeneracy(String),
    #[error("ill-conditioned matrix (condition estimate {0:e})")]
    Conditioning(f64),
    #[error("method unavailable: {0}")]
    Method(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("index out of range: {0}")]
    Index(String),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub fn is_accuracy(&self) -> bool {
        matches!(self, Error::Accuracy { .. })
    }
}
