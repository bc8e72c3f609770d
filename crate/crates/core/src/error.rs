use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("empty sample id at record {0}")]
    EmptyId(usize),
    #[error("invalid test spec {id}: {reason}")]
    InvalidSpec { id: String, reason: String },
    #[error("invalid pronoun map {name}: {reason}")]
    InvalidMap { name: String, reason: String },
    #[error("invalid cleaning config: {0}")]
    InvalidCleaning(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("model error for {key:?}: {message}")]
    Model { key: String, message: String },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("training error: {0}")]
    Training(String),
}

pub type Result<T> = core::result::Result<T, Error>;
