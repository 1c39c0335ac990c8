//! Paired permutation ("Perm-Input") test for comparing two metrics against
//! the same human judgments, and the significance-matrix ranking built on it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CorrelationKind, StatsError};

/// Resampled differences within this distance of the observed difference
/// count as ties (and therefore as "at least as extreme").
pub const DELTA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermTestResult {
    /// corr(a, human) - corr(b, human) on the unpermuted data.
    pub delta: f64,
    /// One-sided, add-one smoothed p-value that `a` correlates better than `b`.
    pub p_value: f64,
    pub runs: usize,
}

/// Tests whether `metric_a` correlates with `human` significantly better than
/// `metric_b`. Each run swaps the two metrics' scores on every segment
/// independently with probability 1/2.
pub fn perm_input_test(
    metric_a: &[f64],
    metric_b: &[f64],
    human: &[f64],
    runs: usize,
    seed: u64,
    kind: CorrelationKind,
) -> Result<PermTestResult, StatsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (forward, _) = paired_counts(metric_a, metric_b, human, runs, &mut rng, kind)?;
    Ok(forward)
}

/// Runs one set of swap patterns and returns the results for both
/// directions, (a over b) and (b over a).
fn paired_counts(
    metric_a: &[f64],
    metric_b: &[f64],
    human: &[f64],
    runs: usize,
    rng: &mut ChaCha8Rng,
    kind: CorrelationKind,
) -> Result<(PermTestResult, PermTestResult), StatsError> {
    if runs == 0 {
        return Err(StatsError::InvalidArgument("runs must be at least 1".into()));
    }
    if metric_a.len() != metric_b.len() || metric_a.len() != human.len() {
        return Err(StatsError::LengthMismatch {
            left: metric_a.len(),
            right: human.len().min(metric_b.len()),
        });
    }
    let delta = kind.compute(metric_a, human)? - kind.compute(metric_b, human)?;
    let n = metric_a.len();
    let mut perm_a = vec![0.0; n];
    let mut perm_b = vec![0.0; n];
    let mut at_least = 0usize;
    let mut at_most = 0usize;
    for _ in 0..runs {
        for i in 0..n {
            if rng.gen::<bool>() {
                perm_a[i] = metric_b[i];
                perm_b[i] = metric_a[i];
            } else {
                perm_a[i] = metric_a[i];
                perm_b[i] = metric_b[i];
            }
        }
        let resampled = kind.compute(&perm_a, human)? - kind.compute(&perm_b, human)?;
        if resampled >= delta - DELTA_TOLERANCE {
            at_least += 1;
        }
        if resampled <= delta + DELTA_TOLERANCE {
            at_most += 1;
        }
    }
    let p = |count: usize| (1 + count) as f64 / (runs + 1) as f64;
    Ok((
        PermTestResult {
            delta,
            p_value: p(at_least),
            runs,
        },
        PermTestResult {
            delta: -delta,
            p_value: p(at_most),
            runs,
        },
    ))
}

/// Scores of one metric aligned with human judgments, segment by segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedScores {
    pub segment_ids: Vec<String>,
    pub metric: Vec<f64>,
    pub human: Vec<f64>,
}

impl PairedScores {
    pub fn new(segment_ids: Vec<String>, metric: Vec<f64>, human: Vec<f64>) -> Result<Self, StatsError> {
        if metric.len() != segment_ids.len() || human.len() != segment_ids.len() {
            return Err(StatsError::LengthMismatch {
                left: metric.len(),
                right: human.len(),
            });
        }
        if segment_ids.len() < 3 {
            return Err(StatsError::TooShort {
                len: segment_ids.len(),
                min: 3,
            });
        }
        if metric.iter().chain(&human).any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(PairedScores {
            segment_ids,
            metric,
            human,
        })
    }

    fn sorted(&self) -> PairedScores {
        let mut order: Vec<usize> = (0..self.segment_ids.len()).collect();
        order.sort_by(|&a, &b| self.segment_ids[a].cmp(&self.segment_ids[b]));
        PairedScores {
            segment_ids: order.iter().map(|&i| self.segment_ids[i].clone()).collect(),
            metric: order.iter().map(|&i| self.metric[i]).collect(),
            human: order.iter().map(|&i| self.human[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub metric_names: Vec<String>,
    /// `p_values[i][j]`: p-value that metric i outperforms metric j. `None`
    /// on the diagonal.
    pub p_values: Vec<Vec<Option<f64>>>,
    pub alpha: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub name: String,
    pub rank: usize,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRanking {
    pub entries: Vec<RankEntry>,
}

impl MetricRanking {
    pub fn get(&self, name: &str) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Seed for the swap stream of one unordered metric pair.
pub fn pair_seed(seed: u64, first: &str, second: &str) -> u64 {
    let (lo, hi) = if first <= second { (first, second) } else { (second, first) };
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((lo.len() as u64).to_le_bytes());
    hasher.update(lo.as_bytes());
    hasher.update(hi.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Fills the pairwise significance matrix and ranks every metric as
/// `1 + number of metrics significantly better than it`.
pub fn rank_metrics(
    metrics: &[(String, PairedScores)],
    alpha: f64,
    runs: usize,
    seed: u64,
    kind: CorrelationKind,
) -> Result<(SignificanceMatrix, MetricRanking), StatsError> {
    if metrics.is_empty() {
        return Err(StatsError::InvalidArgument("no metrics to rank".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(StatsError::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    let sorted: Vec<PairedScores> = metrics.iter().map(|(_, s)| s.sorted()).collect();
    let reference = &sorted[0];
    for ((name, _), scores) in metrics.iter().zip(&sorted).skip(1) {
        if scores.segment_ids != reference.segment_ids {
            let offender = first_difference(&reference.segment_ids, &scores.segment_ids);
            return Err(StatsError::SegmentMismatch {
                metric: name.clone(),
                segment_id: offender,
            });
        }
    }
    let human = &reference.human;

    let m = metrics.len();
    let mut p_values = vec![vec![None; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let mut rng = ChaCha8Rng::seed_from_u64(pair_seed(seed, &metrics[i].0, &metrics[j].0));
            // The swap stream is keyed by the sorted name pair, so orient the
            // test by name to make results independent of input order.
            let (lo, hi) = if metrics[i].0 <= metrics[j].0 { (i, j) } else { (j, i) };
            let (lo_over_hi, hi_over_lo) =
                paired_counts(&sorted[lo].metric, &sorted[hi].metric, human, runs, &mut rng, kind)?;
            p_values[lo][hi] = Some(lo_over_hi.p_value);
            p_values[hi][lo] = Some(hi_over_lo.p_value);
        }
    }

    let mut entries = Vec::with_capacity(m);
    for i in 0..m {
        let better = (0..m)
            .filter(|&j| matches!(p_values[j][i], Some(p) if p < alpha))
            .count();
        entries.push(RankEntry {
            name: metrics[i].0.clone(),
            rank: 1 + better,
            correlation: kind.compute(&sorted[i].metric, human)?,
        });
    }
    Ok((
        SignificanceMatrix {
            metric_names: metrics.iter().map(|(n, _)| n.clone()).collect(),
            p_values,
            alpha,
            runs,
        },
        MetricRanking { entries },
    ))
}

fn first_difference(expected: &[String], found: &[String]) -> String {
    use std::collections::BTreeSet;
    let a: BTreeSet<&String> = expected.iter().collect();
    let b: BTreeSet<&String> = found.iter().collect();
    a.symmetric_difference(&b)
        .next()
        .map(|s| s.to_string())
        .unwrap_or_else(|| "<duplicate segment_id>".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:03}")).collect()
    }

    #[test]
    fn identical_metrics_never_significant() {
        let human = [0.1, 0.5, 0.3, 0.9, 0.7];
        let a = [0.2, 0.4, 0.1, 0.8, 0.9];
        let r = perm_input_test(&a, &a, &human, 200, 3, CorrelationKind::Spearman).unwrap();
        assert_eq!(r.delta, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn perfect_metric_beats_inverted_metric() {
        let human: Vec<f64> = (0..20).map(|i| ((i * 7) % 20) as f64).collect();
        let neg: Vec<f64> = human.iter().map(|v| -v).collect();
        let r = perm_input_test(&human, &neg, &human, 200, 0, CorrelationKind::Spearman).unwrap();
        assert!(r.p_value < 0.05, "p = {}", r.p_value);
    }

    #[test]
    fn zero_runs_rejected() {
        let v = [1.0, 2.0, 3.0];
        assert!(perm_input_test(&v, &v, &v, 0, 0, CorrelationKind::Pearson).is_err());
    }

    #[test]
    fn ranking_single_and_identical() {
        let human = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let s = PairedScores::new(ids(5), vec![2.0, 1.0, 3.0, 5.0, 4.0], human.clone()).unwrap();
        let (_, ranking) =
            rank_metrics(&[("only".into(), s.clone())], 0.05, 50, 0, CorrelationKind::Spearman).unwrap();
        assert_eq!(ranking.get("only").unwrap().rank, 1);

        let (matrix, ranking) = rank_metrics(
            &[("a".into(), s.clone()), ("b".into(), s)],
            0.05,
            200,
            0,
            CorrelationKind::Spearman,
        )
        .unwrap();
        assert_eq!(ranking.get("a").unwrap().rank, 1);
        assert_eq!(ranking.get("b").unwrap().rank, 1);
        assert_eq!(matrix.p_values[0][0], None);
    }

    #[test]
    fn ranking_rejects_mismatched_segments() {
        let a = PairedScores::new(ids(3), vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]).unwrap();
        let mut other = ids(3);
        other[2] = "zzz".into();
        let b = PairedScores::new(other, vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]).unwrap();
        match rank_metrics(&[("a".into(), a), ("b".into(), b)], 0.05, 10, 0, CorrelationKind::Pearson) {
            Err(StatsError::SegmentMismatch { metric, .. }) => assert_eq!(metric, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pair_seed_is_symmetric() {
        assert_eq!(pair_seed(5, "x", "y"), pair_seed(5, "y", "x"));
        assert_ne!(pair_seed(5, "x", "y"), pair_seed(6, "x", "y"));
        assert_ne!(pair_seed(5, "ab", "c"), pair_seed(5, "a", "bc"));
    }
}
