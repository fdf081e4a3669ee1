//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("{referrer_kind} `{referrer}` references unknown {target_kind} `{target}`")]
    DanglingReference {
        referrer_kind: &'static str,
        referrer: String,
        target_kind: &'static str,
        target: String,
    },

    #[error("collaborator counts asymmetric: {a}->{b} is {ab}, {b}->{a} is {ba}")]
    AsymmetricCollaboration {
        a: String,
        b: String,
        ab: u64,
        ba: u64,
    },

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("no embedding stored for `{id}`")]
    MissingEmbedding { id: String },

    #[error("no eligible entries for nearest-neighbor query")]
    EmptyEligibleSet,

    #[error("centroid of an empty id set is undefined")]
    EmptyIdSet,

    #[error("embedding vector contains a non-finite value")]
    NonFiniteEmbedding,

    #[error("invalid chat request: {0}")]
    InvalidRequest(String),

    #[error("backend transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("backend returned an empty completion")]
    EmptyCompletion,

    #[error("candidate pool has {available} researchers, need {needed}")]
    PoolTooSmall { available: usize, needed: usize },

    #[error(
        "diversity constraint infeasible: need {required} distinct-topic scientists, pool offers {available}"
    )]
    InfeasibleDiversity { required: usize, available: usize },

    #[error("collaboration matrix must be smoothed before sampling")]
    MatrixNotSmoothed,

    #[error("researcher `{id}` has no embedded publications")]
    NoEmbeddedPublications { id: String },

    #[error("missing knowledge profile for `{id}`")]
    MissingProfile { id: String },

    #[error("invalid ballot from `{reviewer}`: {message}")]
    InvalidBallot { reviewer: String, message: String },

    #[error("ballots do not rank a consistent idea set: {0}")]
    InconsistentBallots(String),

    #[error("no usable ballots remain")]
    NoUsableBallots,

    #[error("reviewer list is empty")]
    NoReviewers,

    #[error("the {side} split is empty; baseline undefined")]
    EmptySplit { side: &'static str },

    #[error("normalization mean must be positive, got {0}")]
    NonPositiveMean(f64),

    #[error("overall novelty undefined: contemporary dissimilarity is zero")]
    UndefinedOverallNovelty,

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("unparsable {what} response after re-prompt: {message}")]
    Unparsable {
        what: &'static str,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Transient failures worth retrying at the gateway.
    pub(crate) fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport { .. } | Error::EmptyCompletion)
    }
}
