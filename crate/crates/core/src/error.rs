use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An invalid size, depth, or other construction parameter.
    #[error("configuration error: {0}")]
    Config(String),

    /// Vector or matrix dimensions that do not compose.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A file that does not follow the expected layout.
    #[error("format error: {0}")]
    Format(String),

    /// Loss or parameters became non-finite during training.
    #[error("numeric divergence: {0}")]
    Divergence(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}
