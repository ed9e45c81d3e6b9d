use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// A caller-supplied parameter is out of range.
    Parameter,
    /// Input data is missing, malformed or inconsistent.
    Data,
    /// The data is well formed but the algorithm could not produce a result.
    Algorithm,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("path does not exist: {}", .0.display())]
    MissingPath(PathBuf),
    #[error("zero frames")]
    ZeroFrames,
    #[error("mixed dimensions: expected {expected_width}x{expected_height}, frame {index} is {width}x{height}")]
    MixedDimensions {
        index: usize,
        expected_width: u32,
        expected_height: u32,
        width: u32,
        height: u32,
    },
    #[error("unsupported bit depth: {0}")]
    UnsupportedBitDepth(u32),
    #[error("roi ({x0},{y0},{w},{h}) is out of bounds for {width}x{height} frames")]
    RoiOutOfBounds {
        x0: u32,
        y0: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
    #[error("malformed input: {0}")]
    Format(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("underdetermined polynomial fit: {len} samples for order {order}")]
    Underdetermined { len: usize, order: usize },
    #[error("signal too short: {0}")]
    SignalTooShort(String),
    #[error("insufficient peaks: found {found}, need at least {needed}")]
    InsufficientPeaks { found: usize, needed: usize },
    #[error("too few values: {found} (need at least {needed})")]
    TooFewValues { found: usize, needed: usize },
    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),
    #[error("too few waves: {found} valid waves, need at least {needed}")]
    TooFewWaves { found: usize, needed: usize },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image decode error on {}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::RoiOutOfBounds { .. } | Error::InvalidParameter(_) => ErrorKind::Parameter,
            Error::Underdetermined { .. }
            | Error::SignalTooShort(_)
            | Error::InsufficientPeaks { .. }
            | Error::TooFewValues { .. }
            | Error::ZeroVariance(_)
            | Error::TooFewWaves { .. } => ErrorKind::Algorithm,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
