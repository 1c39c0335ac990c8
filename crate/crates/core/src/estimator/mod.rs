//! Embedding-based segment-level quality estimator: feature combination,
//! regressor, training loop and checkpoints.

mod checkpoint;
mod features;
mod model;
mod network;
mod train;

use std::path::PathBuf;

pub use checkpoint::{load_model, read_model, save_model, write_model, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use features::{combine, combine_reference_pair, pool, FeatureLayout, FeatureVector, SentenceEmbedding, LAYOUT_VERSION};
pub use model::{grad_check, EstimatorMode, EstimatorModel, Prediction, TrainExample, GRAD_CHECK_FLOOR};
pub use network::Regressor;
pub use train::{train, EpochRecord, GradientAccumulator, TrainConfig, TrainHistory};

use crate::embeddings::EmbedError;

#[derive(Debug, thiserror::Error)]
pub enum EstimatorError {
    #[error("embedding width {found} does not match expected width {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("this mode needs a reference translation")]
    MissingReference,
    #[error("reference-based single-task model cannot score without a reference")]
    QeUnsupported,
    #[error("no training examples")]
    EmptyTrainingSet,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("target {value} at example {index} is outside [0, 1]")]
    InvalidTarget { index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("provider width {provider_dim} does not match model width {model_dim}")]
    DescriptorMismatch { model_dim: usize, provider_dim: usize },
    #[error("checkpoint checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("unsupported checkpoint {what} version {found} (expected {expected})")]
    VersionMismatch { what: &'static str, found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}
