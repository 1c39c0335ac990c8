//! Error-span counting and the correlation of error counts with DA scores.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::normalize::single_dimension;
use super::QaError;
use crate::corpus::{Annotation, Dimension, ErrorCategory, TranslationTriple};
use crate::stats::CorrelationKind;

/// Drops annotations scoring below `threshold` that highlight no spans.
pub fn filter_low_da_no_spans(annotations: &[Annotation], threshold: u8) -> Vec<Annotation> {
    annotations
        .iter()
        .filter(|a| !(a.da_score < threshold && a.spans.is_empty()))
        .cloned()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCountRecord {
    pub segment_id: String,
    pub evaluator_id: String,
    pub dimension: Dimension,
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub total_errors: usize,
    pub avg_error: f64,
    pub da_score: u8,
    pub z_score: Option<f64>,
}

impl ErrorCountRecord {
    pub fn count(&self, category: ErrorCategory) -> usize {
        self.counts.get(&category).copied().unwrap_or(0)
    }
}

/// Character ranges `[start, end)` of whitespace-delimited words.
pub fn word_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut len = 0;
    for (i, c) in text.chars().enumerate() {
        len = i + 1;
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, len));
    }
    out
}

/// Counts, per category, the words each span touches in its target text.
/// `avg_error` divides the total by the reference length in words.
pub fn span_error_counts(
    annotation: &Annotation,
    triple: &TranslationTriple,
    z_score: Option<f64>,
) -> Result<ErrorCountRecord, QaError> {
    let reference = triple
        .reference
        .as_deref()
        .ok_or_else(|| QaError::EmptyReference(triple.segment_id.clone()))?;
    let ref_words = word_ranges(reference).len();
    if ref_words == 0 {
        return Err(QaError::EmptyReference(triple.segment_id.clone()));
    }
    let src_words = word_ranges(&triple.src);
    let mt_words = word_ranges(&triple.mt);

    let mut counts: BTreeMap<ErrorCategory, usize> =
        annotation.dimension.categories().into_iter().map(|c| (c, 0)).collect();
    for span in &annotation.spans {
        let words = match span.target {
            crate::corpus::SpanTarget::SourceSide => &src_words,
            crate::corpus::SpanTarget::TranslationSide => &mt_words,
        };
        let touched = words
            .iter()
            .filter(|&&(ws, we)| span.start < we && ws < span.end)
            .count();
        *counts.entry(span.category).or_insert(0) += touched;
    }
    let total_errors: usize = counts.values().sum();
    Ok(ErrorCountRecord {
        segment_id: annotation.segment_id.clone(),
        evaluator_id: annotation.evaluator_id.clone(),
        dimension: annotation.dimension,
        counts,
        total_errors,
        avg_error: total_errors as f64 / ref_words as f64,
        da_score: annotation.da_score,
        z_score,
    })
}

/// One cell of the correlation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrCell {
    Value(f64),
    Undefined { reason: String },
}

impl CorrCell {
    pub fn value(&self) -> Option<f64> {
        match self {
            CorrCell::Value(v) => Some(*v),
            CorrCell::Undefined { .. } => None,
        }
    }
}

impl fmt::Display for CorrCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrCell::Value(v) => write!(f, "{v:.3}"),
            CorrCell::Undefined { .. } => f.write_str("NA"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreColumn {
    Da,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub label: String,
    /// Column order: pearson/da, pearson/z, spearman/da, spearman/z,
    /// kendall/da, kendall/z.
    pub cells: Vec<CorrCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub dimension: Dimension,
    pub rows: Vec<GridRow>,
}

impl CorrelationGrid {
    pub const COLUMNS: [(CorrelationKind, ScoreColumn); 6] = [
        (CorrelationKind::Pearson, ScoreColumn::Da),
        (CorrelationKind::Pearson, ScoreColumn::Z),
        (CorrelationKind::Spearman, ScoreColumn::Da),
        (CorrelationKind::Spearman, ScoreColumn::Z),
        (CorrelationKind::Kendall, ScoreColumn::Da),
        (CorrelationKind::Kendall, ScoreColumn::Z),
    ];

    pub fn cell(&self, row: &str, kind: CorrelationKind, column: ScoreColumn) -> Option<&CorrCell> {
        let idx = Self::COLUMNS.iter().position(|&c| c == (kind, column))?;
        self.rows.iter().find(|r| r.label == row).map(|r| &r.cells[idx])
    }

    pub fn column_names() -> Vec<String> {
        Self::COLUMNS
            .iter()
            .map(|(k, c)| {
                format!(
                    "{}_{}",
                    k,
                    match c {
                        ScoreColumn::Da => "da",
                        ScoreColumn::Z => "z",
                    }
                )
            })
            .collect()
    }
}

pub const TOTAL_ERROR_ROW: &str = "Total Error";
pub const AVG_ERROR_ROW: &str = "Avg. Error";

/// Correlates every category count (plus total and per-reference-length
/// average) with raw DA scores and z-scores.
pub fn error_score_correlations(records: &[ErrorCountRecord]) -> Result<CorrelationGrid, QaError> {
    if records.len() < 3 {
        return Err(QaError::TooFewSegments(records.len()));
    }
    let dimension = records[0].dimension;
    if records.iter().any(|r| r.dimension != dimension) {
        return Err(QaError::MixedDimensions);
    }
    let da: Vec<f64> = records.iter().map(|r| r.da_score as f64).collect();
    let z: Option<Vec<f64>> = records.iter().map(|r| r.z_score).collect();

    let mut features: Vec<(String, Vec<f64>)> = dimension
        .categories()
        .into_iter()
        .map(|c| (c.to_string(), records.iter().map(|r| r.count(c) as f64).collect()))
        .collect();
    features.push((
        TOTAL_ERROR_ROW.to_string(),
        records.iter().map(|r| r.total_errors as f64).collect(),
    ));
    features.push((
        AVG_ERROR_ROW.to_string(),
        records.iter().map(|r| r.avg_error).collect(),
    ));

    let rows = features
        .into_iter()
        .map(|(label, values)| {
            let cells = CorrelationGrid::COLUMNS
                .iter()
                .map(|&(kind, column)| {
                    let target = match column {
                        ScoreColumn::Da => Some(&da),
                        ScoreColumn::Z => z.as_ref(),
                    };
                    match target {
                        None => CorrCell::Undefined {
                            reason: "z-scores unavailable".into(),
                        },
                        Some(t) => match kind.compute(&values, t) {
                            Ok(v) => CorrCell::Value(v),
                            Err(e) => CorrCell::Undefined {
                                reason: e.to_string(),
                            },
                        },
                    }
                })
                .collect();
            GridRow { label, cells }
        })
        .collect();
    Ok(CorrelationGrid { dimension, rows })
}

/// Runs the span analytics end to end: low-score/no-span filter, word
/// counting against each triple, and the correlation grid. `z_scores` are
/// aligned with `annotations`.
pub fn error_analysis(
    annotations: &[Annotation],
    z_scores: &[f64],
    triples: &crate::corpus::TripleSet,
    low_da_threshold: u8,
) -> Result<(Vec<ErrorCountRecord>, CorrelationGrid), QaError> {
    single_dimension(annotations)?;
    let mut records = Vec::new();
    for (a, &z) in annotations.iter().zip(z_scores) {
        if a.da_score < low_da_threshold && a.spans.is_empty() {
            continue;
        }
        let triple = triples
            .get(&a.segment_id)
            .ok_or_else(|| QaError::UnknownSegment(a.segment_id.clone()))?;
        records.push(span_error_counts(a, triple, Some(z))?);
    }
    let grid = error_score_correlations(&records)?;
    Ok((records, grid))
}
