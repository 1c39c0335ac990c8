//! Quality assurance over raw annotations: discrepancy filtering, evaluator
//! z-normalization, segment aggregation, min-max scaling, inter-annotator
//! agreement and error-span analytics.

mod analytics;
mod iaa;
mod normalize;

use serde::{Deserialize, Serialize};

pub use analytics::{
    error_analysis, error_score_correlations, filter_low_da_no_spans, span_error_counts,
    word_ranges, CorrCell, CorrelationGrid, ErrorCountRecord, GridRow, ScoreColumn,
    AVG_ERROR_ROW, TOTAL_ERROR_ROW,
};
pub use iaa::{iaa, IaaReport};
pub use normalize::{
    aggregate_segment, filter_discrepant, group_by_segment, minmax_scale, qualify, znormalize,
    DiscrepancyOutcome, MinMax, QaOutcome,
};

use crate::stats::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaConfig {
    /// Segments whose DA scores spread by more than this are dropped.
    pub discrepancy_threshold: u8,
    /// Annotations below this score without any span are excluded from
    /// error analytics.
    pub low_da_no_span_threshold: u8,
    pub iaa_repeats: usize,
    pub rng_seed: u64,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            discrepancy_threshold: 34,
            low_da_no_span_threshold: 80,
            iaa_repeats: 100,
            rng_seed: 0,
        }
    }
}

impl QaConfig {
    pub fn validate(&self) -> Result<(), QaError> {
        if self.discrepancy_threshold > 100 || self.low_da_no_span_threshold > 100 {
            return Err(QaError::InvalidConfig("thresholds must lie in [0, 100]".into()));
        }
        if self.iaa_repeats == 0 {
            return Err(QaError::InvalidConfig("iaa_repeats must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QaError {
    #[error("no input")]
    EmptyInput,
    #[error("segment {0:?} has no scores to aggregate")]
    EmptyGroup(String),
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("annotations mix adequacy and fluency; process one dimension at a time")]
    MixedDimensions,
    #[error("insufficient annotators: no segment has two agreeing annotations ({singletons} singleton, {dropped} discrepant)")]
    InsufficientAnnotators { singletons: usize, dropped: usize },
    #[error("need at least two usable segments, found {0}")]
    TooFewSegments(usize),
    #[error("segment {0:?} has no reference words")]
    EmptyReference(String),
    #[error("segment {0:?} is not in the triple file")]
    UnknownSegment(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
