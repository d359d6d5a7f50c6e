use std::path::PathBuf;

/// Errors raised by the tracking library. The message prefix names the
/// subsystem that failed so the CLI can report it verbatim.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("geometry: invalid bounding box ({x}, {y}, {w}, {h}): width and height must be positive and finite")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    #[error("geometry: invalid frame {index}: {reason}")]
    InvalidFrame { index: usize, reason: String },

    #[error("tracker: degenerate target {w}x{h} (area must be at least 4 pixels)")]
    DegenerateTarget { w: f64, h: f64 },

    #[error("tracker: malformed state blob: {0}")]
    StateBlob(String),

    #[error("{module}: invalid parameter: {reason}")]
    InvalidParameter { module: &'static str, reason: String },

    #[error("ensemble: frame {index} not available (sequence covers 1..={len})")]
    FrameOutOfRange { index: usize, len: usize },

    #[error("analysis: trajectory pair mismatch: {0}")]
    TrajectoryMismatch(String),

    #[error("analysis: cannot select from an empty report list")]
    EmptyReports,

    #[error("sequence_io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("sequence_io: {path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("sequence_io: {path}: {reason}")]
    Sequence { path: PathBuf, reason: String },

    #[error("sequence_io: {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("evaluation: {0}")]
    Evaluation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(module: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            module,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
