use serde::{Deserialize, Serialize};

use super::EstimatorError;
use crate::embeddings::EmbeddingMatrix;

/// Pooled sentence-level embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding(pub Vec<f64>);

impl SentenceEmbedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Mean over token rows. `EmbeddingMatrix` always has at least one row.
pub fn pool(matrix: &EmbeddingMatrix) -> SentenceEmbedding {
    let dim = matrix.dim();
    let mut sum = vec![0.0; dim];
    for r in 0..matrix.rows() {
        for (acc, v) in sum.iter_mut().zip(matrix.row(r)) {
            *acc += v;
        }
    }
    let n = matrix.rows() as f64;
    SentenceEmbedding(sum.into_iter().map(|v| v / n).collect())
}

/// How sentence embeddings are concatenated into a regressor input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureLayout {
    /// `[m, s, r, m*s, m*r, |m-s|, |m-r|]`, width 7·dim.
    Full,
    /// `[m, s, m*s, |m-s|]`, width 4·dim.
    SourcePair,
    /// `[m, r, m*r, |m-r|]`, width 4·dim.
    ReferencePair,
}

impl FeatureLayout {
    pub fn width(self, dim: usize) -> usize {
        match self {
            FeatureLayout::Full => 7 * dim,
            FeatureLayout::SourcePair | FeatureLayout::ReferencePair => 4 * dim,
        }
    }
}

/// Version of the layouts above, stored in checkpoints.
pub const LAYOUT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: FeatureLayout,
    pub values: Vec<f64>,
}

fn check_dims(a: &SentenceEmbedding, b: &SentenceEmbedding) -> Result<(), EstimatorError> {
    if a.dim() != b.dim() {
        return Err(EstimatorError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

fn pair_features(mt: &[f64], other: &[f64], out: &mut Vec<f64>) {
    out.extend_from_slice(mt);
    out.extend_from_slice(other);
    out.extend(mt.iter().zip(other).map(|(a, b)| a * b));
    out.extend(mt.iter().zip(other).map(|(a, b)| (a - b).abs()));
}

/// Builds the full layout when `reference` is given, otherwise the
/// reference-free `<src, mt>` layout.
pub fn combine(
    src: &SentenceEmbedding,
    mt: &SentenceEmbedding,
    reference: Option<&SentenceEmbedding>,
) -> Result<FeatureVector, EstimatorError> {
    check_dims(mt, src)?;
    let (m, s) = (mt.as_slice(), src.as_slice());
    match reference {
        None => {
            let mut values = Vec::with_capacity(4 * m.len());
            pair_features(m, s, &mut values);
            Ok(FeatureVector {
                layout: FeatureLayout::SourcePair,
                values,
            })
        }
        Some(reference) => {
            check_dims(mt, reference)?;
            let r = reference.as_slice();
            let mut values = Vec::with_capacity(7 * m.len());
            values.extend_from_slice(m);
            values.extend_from_slice(s);
            values.extend_from_slice(r);
            values.extend(m.iter().zip(s).map(|(a, b)| a * b));
            values.extend(m.iter().zip(r).map(|(a, b)| a * b));
            values.extend(m.iter().zip(s).map(|(a, b)| (a - b).abs()));
            values.extend(m.iter().zip(r).map(|(a, b)| (a - b).abs()));
            Ok(FeatureVector {
                layout: FeatureLayout::Full,
                values,
            })
        }
    }
}

/// The `<mt, ref>` layout used by the multi-task model.
pub fn combine_reference_pair(
    mt: &SentenceEmbedding,
    reference: &SentenceEmbedding,
) -> Result<FeatureVector, EstimatorError> {
    check_dims(mt, reference)?;
    let mut values = Vec::with_capacity(4 * mt.dim());
    pair_features(mt.as_slice(), reference.as_slice(), &mut values);
    Ok(FeatureVector {
        layout: FeatureLayout::ReferencePair,
        values,
    })
}
