use thiserror::Error;

#[derive(Debug, Error)]
pub enum PdqError {
    #[error(transparent)]
    Fhe(#[from] rnsfhe::Error),
    #[error("value {value} outside [0, {limit})")]
    Range { value: u64, limit: u64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("query error: {0}")]
    Query(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("wire error: {0}")]
    Wire(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PdqError>;
