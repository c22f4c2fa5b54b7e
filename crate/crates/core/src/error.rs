use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Failure reported by an inference backend (NLI, embedding or chat).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Transport-level failure; the request may succeed if retried.
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    /// The server answered but the payload did not match the wire contract.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// A fixture backend has no recorded answer for the request.
    #[error("no fixture recorded for request: {0}")]
    MissingFixture(String),
    /// The read-through cache could not be read or written.
    #[error("cache error: {0}")]
    Cache(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Unavailable(_))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid summary: {}", .0.join("; "))]
    InvalidSummary(Vec<String>),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("expected {expected} summaries, got {actual}")]
    Arity { expected: usize, actual: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("sentence {sentence_id}: {source}")]
    Backend {
        sentence_id: String,
        #[source]
        source: BackendError,
    },
    #[error("cell ({row}, {col}): {source}")]
    Comparison {
        row: usize,
        col: usize,
        #[source]
        source: BackendError,
    },
    #[error("embedding backend: {0}")]
    Embedding(#[source] BackendError),
    #[error("sentence {sentence_id}: malformed completion: {reason}")]
    MalformedResponse { sentence_id: String, reason: String },
    #[error("empty completion for {0}")]
    EmptyCompletion(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("counts ({n_cont} + {n_ent} + {n_neut}) do not sum to {opposing}")]
    InconsistentCounts {
        n_cont: usize,
        n_ent: usize,
        n_neut: usize,
        opposing: usize,
    },
    #[error("empty summary: {0}")]
    EmptySummary(String),
    #[error("insufficient data: need at least {needed} samples, got {actual}")]
    InsufficientData { needed: usize, actual: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("pair {pair_id}: missing {ingredient}")]
    MissingIngredient { pair_id: String, ingredient: String },
    #[error("negations missing for sentence ids: {}", .0.join(", "))]
    NegationCoverage(Vec<String>),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
