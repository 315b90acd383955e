use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("reserved marker {marker} found at character {position}")]
    MarkerCollision { marker: &'static str, position: usize },

    #[error("table needs at least 2 aligned rows, got {0}")]
    TooFewRows(usize),

    #[error("table pair is not aligned")]
    NotAligned,

    #[error("example set is empty")]
    EmptyExampleSet,

    #[error("duplicate example pair ({source_text:?} -> {target:?})")]
    DuplicatePair { source_text: String, target: String },

    #[error("need at least {needed} examples, have {available}")]
    InsufficientExamples { needed: usize, available: usize },

    #[error("invalid transformation: {0}")]
    Grammar(String),

    #[error("cannot parse transformation at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("target table is empty")]
    EmptyTargetTable,

    #[error("predictions cover {predicted} rows but truth has {truth}")]
    LengthMismatch { predicted: usize, truth: usize },

    #[error("dataset has no tables")]
    EmptyDataset,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("remote endpoint failed with status {status}: {body}")]
    Remote { status: u16, body: String },

    #[error("prompt of {len} characters exceeds the limit of {limit}")]
    OversizePrompt { len: usize, limit: usize },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
