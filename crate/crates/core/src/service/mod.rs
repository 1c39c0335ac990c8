//! Annotation collection backend: projects, calibration-gated task
//! assignment, submission validation, progress and export over HTTP.

mod config;
mod guidelines;
mod http;
mod store;
mod workflow;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use config::{ServiceConfig, ENV_PORT, ENV_STORAGE_PATH};
pub use guidelines::{bucket_labels, guidelines, BucketLabel, Guidelines, DA_BUCKETS};
pub use http::{router, serve};
pub use store::{KvStore, MemoryStore, RedbStore, Table, WriteBatch};
pub use workflow::AnnotationService;

use crate::corpus::{Dimension, ErrorSpan, LanguagePair, TranslationTriple};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("storage error: {0}")]
    Storage(String),
}

fn default_min_annotators() -> usize {
    2
}

fn default_calibration_size() -> usize {
    20
}

/// Body of `POST /projects`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewProject {
    pub project_id: String,
    pub lp: LanguagePair,
    pub dimension: Dimension,
    pub triples: Vec<TranslationTriple>,
    #[serde(default = "default_min_annotators")]
    pub min_annotators_per_item: usize,
    #[serde(default = "default_calibration_size")]
    pub calibration_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub lp: LanguagePair,
    pub dimension: Dimension,
    pub min_annotators_per_item: usize,
    pub calibration_size: usize,
    /// Sorted segment ids.
    pub segment_ids: Vec<String>,
}

impl Project {
    /// The shared calibration prefix.
    pub fn calibration_ids(&self) -> &[String] {
        &self.segment_ids[..self.calibration_size]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Pending,
    Submitted,
    Reopened,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAssignment {
    pub task_id: String,
    pub project_id: String,
    pub segment_id: String,
    pub evaluator_id: String,
    pub state: TaskState,
    pub is_calibration: bool,
}

/// A task with the texts needed to annotate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskView {
    #[serde(flatten)]
    pub task: TaskAssignment,
    pub dimension: Dimension,
    pub src: String,
    pub mt: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatorProfile {
    pub evaluator_id: String,
    pub calibration_complete: bool,
    pub items_done: usize,
    pub calibration_done: usize,
}

/// Body of `POST /projects/{id}/evaluators`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewEvaluator {
    pub evaluator_id: String,
}

/// Body of `POST /tasks/{id}/submit`. The score is read as a plain integer
/// so out-of-range values reach validation instead of failing to parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    #[serde(default)]
    pub spans: Vec<ErrorSpan>,
    pub da_score: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub project_id: String,
    pub segments: usize,
    pub calibration_size: usize,
    pub min_annotators_per_item: usize,
    pub total_submissions: usize,
    /// Segments with at least `min_annotators_per_item` submitters.
    pub segments_covered: usize,
    pub submitters_per_segment: BTreeMap<String, usize>,
    pub evaluators: Vec<EvaluatorProfile>,
}
