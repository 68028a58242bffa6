use std::path::PathBuf;
use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Library {
        context: String,
        #[source]
        source: lsfbm::Error,
    },

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot serialize output: {0}")]
    Json(#[from] serde_json::Error),

    #[error("cannot start worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    /// 2 usage, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use lsfbm::Error as E;
        match self {
            CliError::Usage(_) | CliError::ThreadPool(_) => 2,
            CliError::Library { source, .. } => match source {
                E::InvalidParameter(_) => 2,
                E::Domain { .. } | E::Numerical(_) | E::Embedding { .. } => 4,
                E::InsufficientData { .. } | E::NonPositive { .. } | E::Data(_) | E::Io(_) | E::Csv(_) => 3,
            },
            CliError::Io { .. } | CliError::Json(_) => 3,
        }
    }
}

/// Attaches a context string to library errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for lsfbm::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Library {
            context: what(),
            source,
        })
    }
}

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
