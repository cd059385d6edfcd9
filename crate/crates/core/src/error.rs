use std::path::PathBuf;

use crate::ingest::Sentiment;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unmappable label at row {row}: {value:?}")]
    UnmappableLabel { row: u64, value: String },

    #[error("malformed row {row}: expected {expected} columns, found {found}")]
    MalformedRow {
        row: u64,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    UndefinedSimilarity,

    #[error("text is empty after cleaning")]
    EmptyText,

    #[error("texts at indices {indices:?} embed to the zero vector")]
    ZeroEmbedding { indices: Vec<usize> },

    #[error("every text in the batch is empty after cleaning")]
    EmptyBatch,

    #[error("class {class} has {found} documents, needs at least {needed}")]
    InsufficientClass {
        class: Sentiment,
        needed: usize,
        found: usize,
    },

    #[error("class {0} has no exemplars")]
    EmptyClass(Sentiment),

    #[error("document {id:?} has no label")]
    Unlabeled { id: String },

    #[error("duplicate document id {0:?}")]
    DuplicateId(String),

    #[error("invalid k = {k} for {n} points")]
    InvalidK { k: usize, n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("{rate} is undefined: denominator is zero")]
    UndefinedRate { rate: &'static str },

    #[error("scores and labels must contain both classes")]
    SingleClass,

    #[error("no precomputed embedding for text {0:?}")]
    UnknownText(String),

    #[error("corrupt corpus: {0}")]
    CorruptCorpus(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
