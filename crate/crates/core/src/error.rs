use std::path::PathBuf;

use crate::ontology::Dimension;
use crate::situations::DocumentId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown concept `{concept}` in the {dimension} taxonomy")]
    UnknownConcept { dimension: Dimension, concept: String },

    #[error("concept belongs to the {found} taxonomy, expected {expected}")]
    DimensionMismatch { expected: Dimension, found: Dimension },

    #[error("invalid {dimension} taxonomy at node `{node}`: {reason}")]
    InvalidTaxonomy {
        dimension: Dimension,
        node: String,
        reason: String,
    },

    #[error("case base is empty")]
    EmptyCaseBase,

    #[error("no critical situations are defined")]
    EmptyCriticalSet,

    #[error("unknown document {0}")]
    UnknownDocument(DocumentId),

    #[error("invalid preferences for document {doc}: {reason}")]
    InvalidPreferences { doc: DocumentId, reason: String },

    #[error("insufficient data: need at least {needed}, have {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("candidate pool has {pool} documents, slate needs {needed}")]
    InsufficientCandidates { pool: usize, needed: usize },

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{what} = {value} is outside its valid range")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("corpus generation failed: {0}")]
    Generation(String),

    #[error("unusable corpus: {0}")]
    UnusableCorpus(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {context}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
