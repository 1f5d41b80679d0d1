use std::path::{Path, PathBuf};

use swimset_core::validation::Violation;

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] swimset_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl ServiceError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Why a write to the annotation store was refused.
#[derive(Debug, thiserror::Error)]
pub enum PutError {
    #[error("unknown frame `{0}`")]
    NotFound(String),
    #[error("version conflict: expected {expected}, stored {current_version}")]
    Conflict { expected: u64, current_version: u64 },
    #[error("{} violation(s)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("could not persist manifest: {0}")]
    Storage(swimset_core::Error),
    #[error("annotation writer stopped")]
    Unavailable,
}
