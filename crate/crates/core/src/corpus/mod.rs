//! Data model and JSONL file I/O for translation triples and annotations.

mod io;
mod types;

use std::path::PathBuf;

pub use io::{
    annotations_to_jsonl, load_triples, read_annotations, read_annotations_from, read_triples_from,
    round_trip, write_annotations,
    write_triples, TripleSet,
};
pub use types::{
    char_len, char_slice, Annotation, Dimension, ErrorCategory, ErrorSpan, LanguagePair,
    SegmentScore, Split, SpanTarget, TranslationTriple, ANNOTATION_SCHEMA_VERSION,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate segment_id {segment_id:?}")]
    DuplicateSegmentId { line: usize, segment_id: String },
    #[error("line {line}: schema_version {found} is not supported (expected {expected})")]
    SchemaVersion { line: usize, found: u32, expected: u32 },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl CorpusError {
    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        CorpusError::Invariant(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }
}
