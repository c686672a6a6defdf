use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed document: {0}")]
    MalformedDocument(String),

    #[error("duplicate feature id `{0}`")]
    DuplicateFeatureId(String),

    #[error("feature `{feature}` lists unknown prerequisite `{prerequisite}`")]
    UnknownPrerequisite { feature: String, prerequisite: String },

    #[error("threshold {0} is outside [0, 10]")]
    InvalidThreshold(f64),

    #[error("invalid feature `{id}`: {reason}")]
    InvalidFeature { id: String, reason: String },

    #[error("prerequisite graph contains a cycle through {}", .0.join(", "))]
    CyclicModel(Vec<String>),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("invalid school year {0}; years start at 1")]
    InvalidYear(u32),

    #[error("session index {got} does not follow session counter {counter}")]
    SessionIndexMismatch { counter: u32, got: u32 },

    #[error("feature `{0}` is locked")]
    FeatureLocked(String),

    #[error("invalid game result: {0}")]
    InvalidResult(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("feature `{feature}` has a non-improving streak of {streak}, below the limit {limit}")]
    DemotionNotTriggered { feature: String, streak: u32, limit: u32 },

    #[error("no playable feature in the candidate pool")]
    EmptyPool,

    #[error("no lexicon content exercises feature `{0}`")]
    NoContent(String),

    #[error("result does not match plan: {0}")]
    PlanResultMismatch(String),

    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),

    #[error("invalid student id `{0}`: use ASCII letters, digits, `-`, `_` or `.`")]
    InvalidStudentId(String),

    #[error("student `{0}` not found")]
    NotFound(String),

    #[error("student `{0}` already exists")]
    AlreadyExists(String),

    #[error("corrupt record in {} at line {line}: {reason}", .path.display())]
    CorruptRecord { path: PathBuf, line: usize, reason: String },

    #[error("student `{0}` is locked by another process")]
    LockContention(String),

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
