use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum DeckError {
    #[error(transparent)]
    Core(#[from] deck_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("unreachable backend {locator}: {message}")]
    Unreachable { locator: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl DeckError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DeckError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, line: u64, message: impl Into<String>) -> Self {
        DeckError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DeckError>;
