use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{QaConfig, QaError};
use crate::corpus::{Annotation, Dimension, SegmentScore};

/// Result of the discrepancy filter, keyed by segment id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscrepancyOutcome {
    pub kept: BTreeMap<String, Vec<Annotation>>,
    pub dropped: BTreeMap<String, Vec<Annotation>>,
    /// Segments with fewer than two annotations; neither kept nor dropped.
    pub singletons: BTreeMap<String, Vec<Annotation>>,
}

impl DiscrepancyOutcome {
    pub fn kept_annotations(&self) -> Vec<Annotation> {
        self.kept.values().flatten().cloned().collect()
    }
}

pub fn group_by_segment(annotations: &[Annotation]) -> BTreeMap<String, Vec<Annotation>> {
    let mut groups: BTreeMap<String, Vec<Annotation>> = BTreeMap::new();
    for a in annotations {
        groups.entry(a.segment_id.clone()).or_default().push(a.clone());
    }
    groups
}

/// Drops every segment whose DA scores spread by strictly more than
/// `threshold` points.
pub fn filter_discrepant(annotations: &[Annotation], threshold: u8) -> DiscrepancyOutcome {
    let mut out = DiscrepancyOutcome::default();
    for (segment, group) in group_by_segment(annotations) {
        if group.len() < 2 {
            out.singletons.insert(segment, group);
            continue;
        }
        let max = group.iter().map(|a| a.da_score).max().unwrap_or(0);
        let min = group.iter().map(|a| a.da_score).min().unwrap_or(0);
        if max - min > threshold {
            out.dropped.insert(segment, group);
        } else {
            out.kept.insert(segment, group);
        }
    }
    out
}

/// Per-evaluator z-scores, aligned with `annotations`. Evaluators with a
/// single annotation or constant scores map to 0.
pub fn znormalize(annotations: &[Annotation]) -> Vec<f64> {
    let mut by_evaluator: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, a) in annotations.iter().enumerate() {
        by_evaluator.entry(a.evaluator_id.as_str()).or_default().push(i);
    }
    let mut z = vec![0.0; annotations.len()];
    for indices in by_evaluator.values() {
        if indices.len() < 2 {
            continue;
        }
        let scores: Vec<f64> = indices.iter().map(|&i| annotations[i].da_score as f64).collect();
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        if var == 0.0 {
            continue;
        }
        let sd = var.sqrt();
        for (&i, s) in indices.iter().zip(&scores) {
            z[i] = (s - mean) / sd;
        }
    }
    z
}

pub fn aggregate_segment(segment_id: &str, z_scores: &[f64]) -> Result<SegmentScore, QaError> {
    if z_scores.is_empty() {
        return Err(QaError::EmptyGroup(segment_id.to_string()));
    }
    Ok(SegmentScore {
        segment_id: segment_id.to_string(),
        z_mean: z_scores.iter().sum::<f64>() / z_scores.len() as f64,
        scaled: None,
        n_annotators: z_scores.len(),
    })
}

/// The (min, max) pair a min-max scaling was fitted on. Persisted next to
/// training targets so inference can map predictions back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: &[f64]) -> Result<Self, QaError> {
        if values.is_empty() {
            return Err(QaError::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QaError::NonFinite);
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(MinMax { min, max })
    }

    pub fn scale(&self, x: f64) -> f64 {
        if self.max == self.min {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn unscale(&self, y: f64) -> f64 {
        if self.max == self.min {
            self.min
        } else {
            self.min + y * (self.max - self.min)
        }
    }
}

pub fn minmax_scale(values: &[f64]) -> Result<(Vec<f64>, MinMax), QaError> {
    let bounds = MinMax::fit(values)?;
    Ok((values.iter().map(|&v| bounds.scale(v)).collect(), bounds))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaOutcome {
    pub dimension: Dimension,
    /// Sorted by segment id, each with `scaled` filled in.
    pub scores: Vec<SegmentScore>,
    pub bounds: MinMax,
    pub dropped: Vec<String>,
    pub singletons: Vec<String>,
}

/// Discrepancy filter, then per-evaluator z-normalization over the
/// surviving annotations, then per-segment averaging and min-max scaling.
pub fn qualify(annotations: &[Annotation], config: &QaConfig) -> Result<QaOutcome, QaError> {
    config.validate()?;
    let dimension = single_dimension(annotations)?;
    let filtered = filter_discrepant(annotations, config.discrepancy_threshold);
    if filtered.kept.is_empty() {
        return Err(QaError::InsufficientAnnotators {
            singletons: filtered.singletons.len(),
            dropped: filtered.dropped.len(),
        });
    }
    let kept = filtered.kept_annotations();
    let z = znormalize(&kept);
    let mut per_segment: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (a, z) in kept.iter().zip(&z) {
        per_segment.entry(a.segment_id.as_str()).or_default().push(*z);
    }
    let mut scores = per_segment
        .iter()
        .map(|(id, zs)| aggregate_segment(id, zs))
        .collect::<Result<Vec<_>, _>>()?;
    let means: Vec<f64> = scores.iter().map(|s| s.z_mean).collect();
    let (scaled, bounds) = minmax_scale(&means)?;
    for (s, v) in scores.iter_mut().zip(scaled) {
        s.scaled = Some(v);
    }
    Ok(QaOutcome {
        dimension,
        scores,
        bounds,
        dropped: filtered.dropped.into_keys().collect(),
        singletons: filtered.singletons.into_keys().collect(),
    })
}

pub(crate) fn single_dimension(annotations: &[Annotation]) -> Result<Dimension, QaError> {
    let first = annotations.first().ok_or(QaError::EmptyInput)?.dimension;
    if annotations.iter().any(|a| a.dimension != first) {
        return Err(QaError::MixedDimensions);
    }
    Ok(first)
}
