//! Correlation coefficients, paired permutation significance testing,
//! metric ranking and mean imputation.

mod correlation;
mod permutation;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use correlation::{average_ranks, kendall, pearson, spearman};
pub use permutation::{
    pair_seed, perm_input_test, rank_metrics, MetricRanking, PairedScores, PermTestResult,
    RankEntry, SignificanceMatrix, DELTA_TOLERANCE,
};

/// Which input of a correlation had zero variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    X,
    Y,
    Both,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::X => "x",
            Side::Y => "y",
            Side::Both => "x and y",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {min} values, got {len}")]
    TooShort { len: usize, min: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("zero variance in {0}")]
    DegenerateVariance(Side),
    #[error("metric {metric:?} does not cover the same segments (first offender: {segment_id:?})")]
    SegmentMismatch { metric: String, segment_id: String },
    #[error("every value is missing")]
    AllMissing,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    #[default]
    Spearman,
    Kendall,
}

impl CorrelationKind {
    pub const ALL: [CorrelationKind; 3] = [
        CorrelationKind::Pearson,
        CorrelationKind::Spearman,
        CorrelationKind::Kendall,
    ];

    pub fn compute(self, x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
        match self {
            CorrelationKind::Pearson => pearson(x, y),
            CorrelationKind::Spearman => spearman(x, y),
            CorrelationKind::Kendall => kendall(x, y),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationKind::Pearson => "pearson",
            CorrelationKind::Spearman => "spearman",
            CorrelationKind::Kendall => "kendall",
        }
    }
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrelationKind {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" => Ok(CorrelationKind::Pearson),
            "spearman" => Ok(CorrelationKind::Spearman),
            "kendall" => Ok(CorrelationKind::Kendall),
            other => Err(StatsError::InvalidArgument(format!("unknown correlation {other:?}"))),
        }
    }
}

/// Replaces each missing entry with the mean of the present ones.
pub fn mean_impute(scores: &[Option<f64>]) -> Result<Vec<f64>, StatsError> {
    let present: Vec<f64> = scores.iter().flatten().copied().collect();
    if present.is_empty() {
        return Err(StatsError::AllMissing);
    }
    if present.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    Ok(scores.iter().map(|s| s.unwrap_or(mean)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impute_examples() {
        let out = mean_impute(&[Some(0.5), None, Some(0.7)]).unwrap();
        assert_eq!(out[0], 0.5);
        assert!((out[1] - 0.6).abs() < 1e-15);
        assert_eq!(out[2], 0.7);
        assert_eq!(mean_impute(&[Some(1.0), Some(2.0)]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(mean_impute(&[None, None]), Err(StatsError::AllMissing));
    }

    #[test]
    fn kind_parses() {
        assert_eq!("Kendall".parse::<CorrelationKind>().unwrap(), CorrelationKind::Kendall);
        assert!("tau".parse::<CorrelationKind>().is_err());
    }
}
