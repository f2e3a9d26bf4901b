use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("invalid parameters: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("domain mismatch: {0}")]
    Domain(String),
    #[error("level error: {0}")]
    Level(String),
    #[error("scale mismatch: {0}")]
    Scale(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("non-invertible: {0}")]
    NonInvertible(String),
    #[error("encode range: {0}")]
    EncodeRange(String),
    #[error("missing key: {0}")]
    MissingKey(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("checksum mismatch")]
    Checksum,
}

pub type Result<T> = std::result::Result<T, Error>;
