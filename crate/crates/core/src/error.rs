use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file size {actual} is not a multiple of the frame size {frame_bytes}")]
    SizeMismatch { frame_bytes: usize, actual: usize },

    #[error("invalid frame dimensions: {0}")]
    Dimension(String),

    #[error("invalid playout pattern: {0}")]
    InvalidPattern(String),

    #[error("plane dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("frame {width}x{height} too small: minimum side {min_side} required")]
    FrameTooSmall {
        width: usize,
        height: usize,
        min_side: usize,
    },

    #[error("alignment mismatch: {0}")]
    AlignmentMismatch(String),

    #[error("score file has no row for displayed frame {0}")]
    MissingFrame(usize),

    #[error("score file lists displayed frame {0} more than once")]
    DuplicateFrame(usize),

    #[error("score file line {line}: cannot parse {value:?}")]
    BadScore { line: u64, value: String },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("quality series has no non-stalled frame")]
    EmptySeries,

    #[error("at least {needed} rows required, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("linear system is singular")]
    Singular,

    #[error("{solver} did not converge within {iterations} iterations")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("cannot make {k} folds from {rows} rows")]
    TooManyFolds { k: usize, rows: usize },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("model format version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("feature subset mismatch: {0}")]
    FeatureSubsetMismatch(String),

    #[error("parameter grid is empty")]
    EmptyGrid,

    #[error("session {id}: {source}")]
    Session {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_session(self, id: impl Into<String>) -> Self {
        Error::Session {
            id: id.into(),
            source: Box::new(self),
        }
    }
}
