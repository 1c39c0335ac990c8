use serde::{Deserialize, Serialize};

use super::normalize::group_by_segment;
use super::QaError;
use crate::corpus::Annotation;
use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IaaReport {
    pub mean: f64,
    pub per_repeat: Vec<f64>,
    pub segments: usize,
}

/// Split-half agreement on raw DA scores: for each repeat, every segment
/// contributes one randomly chosen annotation to side 1 and the mean of its
/// other annotations to side 2; the Pearson correlation between the sides is
/// averaged over repeats.
///
/// Segments with fewer than two annotations are ignored. The choice for a
/// segment depends only on `(seed, repeat, segment_id)`, so reordering the
/// input does not change the result.
pub fn iaa(annotations: &[Annotation], repeats: usize, seed: u64) -> Result<IaaReport, QaError> {
    if repeats == 0 {
        return Err(QaError::InvalidConfig("iaa repeats must be at least 1".into()));
    }
    let mut groups: Vec<(String, Vec<f64>)> = group_by_segment(annotations)
        .into_iter()
        .filter(|(_, g)| g.len() >= 2)
        .map(|(id, mut g)| {
            g.sort_by(|a, b| a.evaluator_id.cmp(&b.evaluator_id));
            (id, g.iter().map(|a| a.da_score as f64).collect())
        })
        .collect();
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    if groups.len() < 2 {
        return Err(QaError::TooFewSegments(groups.len()));
    }

    let hashes: Vec<u64> = groups.iter().map(|(id, _)| fnv1a(id.as_bytes())).collect();
    let mut side_one = vec![0.0; groups.len()];
    let mut side_two = vec![0.0; groups.len()];
    let mut per_repeat = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        for (k, ((_, scores), &h)) in groups.iter().zip(&hashes).enumerate() {
            let pick = choose(seed, repeat as u64, h, scores.len());
            side_one[k] = scores[pick];
            let rest: f64 = scores
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != pick)
                .map(|(_, s)| s)
                .sum();
            side_two[k] = rest / (scores.len() - 1) as f64;
        }
        per_repeat.push(pearson(&side_one, &side_two)?);
    }
    let mean = per_repeat.iter().sum::<f64>() / repeats as f64;
    Ok(IaaReport {
        mean,
        per_repeat,
        segments: groups.len(),
    })
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn choose(seed: u64, repeat: u64, segment_hash: u64, k: usize) -> usize {
    let x = splitmix64(seed ^ splitmix64(segment_hash ^ splitmix64(repeat)));
    ((x as u128 * k as u128) >> 64) as usize
}
