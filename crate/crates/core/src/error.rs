use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("empty sequence passed to {0}")]
    EmptySequence(&'static str),
    #[error("attention normalizer is degenerate (|sum| = {0:e} < 1e-9)")]
    DegenerateNormalizer(f64),
    #[error("statement has no tokens")]
    EmptyStatement,
    #[error("script has no content")]
    EmptyScript,
    #[error("evaluation set has no positive labels")]
    NoPositives,
    #[error("no training data")]
    DataEmpty,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("missing logline for script {0:?}")]
    MissingLogline(String),
    #[error("script has {scenes} scenes, need at least {needed}")]
    ScriptTooSmall { scenes: usize, needed: usize },
    #[error("descriptor vocabulary has {have} words, need at least {need}")]
    InsufficientVocab { have: usize, need: usize },
    #[error("word {0:?} never occurs in the co-occurrence corpus")]
    ZeroDocFrequency(String),
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("unknown format {0:?}")]
    UnknownFormat(String),
    #[error("missing tags for script {0:?}")]
    MissingTags(String),
    #[error("embedding dimension mismatch: expected {expected}, found {found} ({context})")]
    EmbeddingDimMismatch {
        expected: usize,
        found: usize,
        context: String,
    },
    #[error("vocabulary hash mismatch: checkpoint {checkpoint}, corpus {corpus}")]
    VocabularyMismatch { checkpoint: String, corpus: String },
    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable kind used in single-line CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidTensor(_) => "invalid_tensor",
            Error::EmptySequence(_) => "empty_sequence",
            Error::DegenerateNormalizer(_) => "degenerate_normalizer",
            Error::EmptyStatement => "empty_statement",
            Error::EmptyScript => "empty_script",
            Error::NoPositives => "no_positives",
            Error::DataEmpty => "data_empty",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::MissingLogline(_) => "missing_logline",
            Error::ScriptTooSmall { .. } => "script_too_small",
            Error::InsufficientVocab { .. } => "insufficient_vocab",
            Error::ZeroDocFrequency(_) => "zero_doc_frequency",
            Error::UnknownTag(_) => "unknown_tag",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::DomainError(_) => "domain_error",
            Error::UnknownFormat(_) => "unknown_format",
            Error::MissingTags(_) => "missing_tags",
            Error::EmbeddingDimMismatch { .. } => "embedding_dim_mismatch",
            Error::VocabularyMismatch { .. } => "vocabulary_mismatch",
            Error::Parse { .. } => "parse",
            Error::Checkpoint(_) => "checkpoint",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
