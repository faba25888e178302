use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A hash or experiment configuration is outside its valid range.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called with arguments that violate its contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed external input (proof JSON, hex, CSV).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
