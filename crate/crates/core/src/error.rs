use std::path::PathBuf;

use crate::tensor::Shape;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// The caller asked for something inconsistent (bad flags, bad config).
    Usage,
    /// Input data was missing, malformed, or mismatched.
    Data,
    /// Arithmetic produced non-finite values or an ill-posed problem.
    Numeric,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: Shape, right: Shape },

    #[error("expected single channel, got {0} channels")]
    ExpectedSingleChannel(usize),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid plane: {0}")]
    InvalidPlane(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("invalid network: {0}")]
    InvalidSpec(String),

    #[error("parameters do not match network: {0}")]
    ParamMismatch(String),

    #[error("activations do not match network: {0}")]
    StaleActivations(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated data: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("trailing data: expected {expected} bytes, found {actual}")]
    TrailingData { expected: u64, actual: u64 },

    #[error("unsupported maxval {0} (only 8-bit PGM is supported)")]
    UnsupportedMaxval(u32),

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("frame {index} out of range: file holds {available} frames")]
    FrameOutOfRange { index: usize, available: usize },

    #[error("quantization parameter {0} outside [0, 51]")]
    InvalidQp(i32),

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("invalid training config: {0}")]
    InvalidConfig(String),

    #[error("epoch {epoch} outside schedule of {epochs} epochs")]
    EpochOutOfRange { epoch: usize, epochs: usize },

    #[error("initial model is incompatible with the network: {0}")]
    IncompatibleInit(String),

    #[error("bad magic bytes: not a model file")]
    BadMagic,

    #[error("unsupported model file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("invalid rate-distortion curve: {0}")]
    InvalidCurve(String),

    #[error("curves do not overlap: {0}")]
    NoOverlap(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_)
            | Error::InvalidSpec(_)
            | Error::InvalidQp(_)
            | Error::EpochOutOfRange { .. } => ErrorKind::Usage,
            Error::NonFinite(_) | Error::Numeric(_) => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}
