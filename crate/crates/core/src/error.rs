use std::path::PathBuf;

use thiserror::Error;

use crate::model::BlockHeight;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid address `{0}`: expected 40 hex characters")]
    InvalidAddress(String),

    #[error("invalid platform `{0}`")]
    InvalidPlatform(String),

    #[error("invalid block range {start}:{end}: start exceeds end")]
    InvalidRange { start: BlockHeight, end: BlockHeight },

    #[error("invalid block range `{0}`: expected start:end")]
    InvalidRangeSyntax(String),

    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),

    #[error("block {block} outside range {start}:{end}")]
    BlockOutOfRange {
        block: BlockHeight,
        start: BlockHeight,
        end: BlockHeight,
    },

    #[error("slice t{slice} outside segmentation with {n_segments} segments")]
    SliceOutOfRange { slice: u32, n_segments: u32 },

    #[error("too many parse errors ({count}); first at line {first_line}: {first_message}")]
    TooManyParseErrors {
        count: usize,
        first_line: usize,
        first_message: String,
    },

    #[error("rpc transport error calling {call}: {message}")]
    Transport { call: String, message: String },

    #[error("rpc error calling {call}: {message}")]
    Rpc { call: String, message: String },

    #[error("cannot decode response of {call}: {reason}")]
    Decode { call: String, reason: String },

    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },

    #[error("graph is not connected ({components} components)")]
    NotConnected { components: usize },

    #[error("token {0} is absent from every slice")]
    EmptySeries(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("invalid community assignment: {0}")]
    InvalidAssignment(String),

    #[error("attribute mismatch: {0}")]
    AttributeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed graph file: {0}")]
    MalformedGraph(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
