use thiserror::Error;

/// Errors produced by the locus pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sensor channel {channel} has zero integrated sensitivity")]
    DegenerateSensor { channel: usize },
    #[error("wavelength coverage mismatch: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("locus scale unrecoverable: {0}")]
    LocusScaleUnrecoverable(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid pixel: {0}")]
    InvalidPixel(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
