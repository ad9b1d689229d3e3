use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("duplicate point at index {0}")]
    DuplicatePoint(usize),
    #[error("no closed-form uniform potential for kernel {0}")]
    NoClosedForm(String),
    #[error("potential provider was built for {provider}, not {kernel}")]
    ProviderMismatch { provider: String, kernel: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("matrix not positive definite (failing pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("negative energy {0:e} for a positive definite kernel")]
    NegativeEnergy(f64),
    #[error("degenerate: {0}")]
    Degenerate(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical kind (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NotPositiveDefinite { .. }
                | Error::Singular(_)
                | Error::NegativeEnergy(_)
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
