use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("outside the domain of {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    #[error("insufficient data: need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("non-positive value {value} at index {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("covariance embedding failed: most negative eigenvalue {min_eigenvalue:e} (largest {max_eigenvalue:e})")]
    Embedding {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn domain(function: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            function,
            detail: detail.into(),
        }
    }
}
