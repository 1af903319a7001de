use std::path::PathBuf;

use thiserror::Error;

/// Every fatal condition the pipeline can hit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unreadable stream: {0}")]
    Stream(#[from] std::io::Error),

    #[error("{malformed} of {total} records malformed (limit 10%); first problem: {first}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        first: String,
    },

    #[error("dataset too sparse for {k}-core: no users or items survive")]
    EmptyCore { k: usize },

    #[error("user {user} has {len} interactions; leave-one-out needs at least 3")]
    SequenceTooShort { user: usize, len: usize },

    #[error("user {user}: only {eligible} eligible negatives, {requested} requested")]
    InsufficientNegatives {
        user: usize,
        eligible: usize,
        requested: usize,
    },

    #[error("negative item {item} is part of user {user}'s sequence")]
    NegativeInSequence { user: usize, item: usize },

    #[error("duplicate candidate {0} in ranking pool")]
    DuplicateCandidate(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing artifact {path} (run `{stage}` first)")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("seed mismatch: {path} was produced with seed {found}, current seed is {expected}")]
    SeedMismatch {
        path: PathBuf,
        found: u64,
        expected: u64,
    },

    #[error("duplicate sample id {0} in prediction file")]
    DuplicateSampleId(String),

    #[error("record shape does not match task {task}: {detail}")]
    ShapeMismatch { task: String, detail: String },

    #[error("AUC undefined: need at least one positive and one negative label")]
    SingleClass,

    #[error("training diverged at step {step}: non-finite parameter")]
    Diverged { step: usize },

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
