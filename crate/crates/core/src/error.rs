use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // tree
    #[error("cannot apply an action to a complete tree")]
    ApplyToCompleteTree,
    #[error("tree is incomplete ({0} empty slots remain)")]
    IncompleteTree(usize),
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("node depth {depth} exceeds the encoding depth {max_depth}")]
    DepthExceeded { depth: usize, max_depth: usize },
    #[error("malformed seed template: {0}")]
    BadTemplate(String),

    // oracle
    #[error("the target sequence contains the reserved <end> symbol at position {0}")]
    EmptyVocabToken(usize),
    #[error("node {0} is not a frontier slot with a span")]
    UnknownSlot(usize),
    #[error("action {0} is not valid at this slot")]
    InvalidAction(String),
    #[error("distribution dimensions disagree: {0}")]
    DimensionMismatch(String),
    #[error("beta must lie in [0, 1], got {0}")]
    BetaOutOfRange(f32),
    #[error("unknown oracle `{0}` (expected leftright, uniform, coaching or annealed)")]
    UnknownOracle(String),

    // numerics
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalarLoss(Vec<usize>),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    // policy
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f32),
    #[error("top-k must be at least 1")]
    BadTopK,
    #[error("the auxiliary <end> head is disabled for this model")]
    AuxHeadDisabled,
    #[error("cannot encode an empty bag of words")]
    EmptyBag,
    #[error("model is not conditional; no context encoder is available")]
    NotConditional,

    // trainer / decoder
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("rollout has no steps")]
    EmptyRollout,
    #[error("no hypotheses to evaluate")]
    EmptyHypotheses,

    // cli / io
    #[error("corpus {0} has no sentences")]
    EmptyCorpus(PathBuf),
    #[error("corpus line {line}: reserved token `{token}` may not appear in data")]
    ReservedToken { line: usize, token: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("vocabulary hash mismatch (checkpoint {expected}, supplied {found})")]
    VocabMismatch { expected: String, found: String },
    #[error("embedding file: {0}")]
    Embeddings(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by an internal invariant rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::Invariant(_) | Error::NonFinite(_) | Error::NotScalarLoss(_) | Error::ShapeMismatch(_)
        )
    }

    /// Process exit code: 1 for bad usage or configuration, 2 for bad data,
    /// 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            e if e.is_internal() => 3,
            Error::Config(_)
            | Error::BadTemperature(_)
            | Error::BadTopK
            | Error::BetaOutOfRange(_)
            | Error::UnknownOracle(_)
            | Error::AuxHeadDisabled
            | Error::NotConditional => 1,
            _ => 2,
        }
    }
}
