use std::path::PathBuf;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("unsupported image format (expected binary PGM or PNG): {0}")]
    UnsupportedFormat(String),

    #[error("malformed image: {0}")]
    MalformedImage(String),

    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("image is {width}x{height}, but at least {min}x{min} is required")]
    ImageTooSmall { width: u32, height: u32, min: u32 },

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("total energy {energy} must lie strictly inside ({lo}, {hi})")]
    DegenerateEnergy { energy: f64, lo: f64, hi: f64 },

    #[error("need at least two energy levels")]
    TooFewLevels,

    #[error("invalid maxent problem: {0}")]
    InvalidProblem(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("value {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("no loadable images in {0}")]
    EmptyCorpus(PathBuf),

    #[error("corrupt archive: {0}")]
    CorruptArchive(String),
}

pub type Result<T> = std::result::Result<T, Error>;
