use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::output::{aligned_table, fmt_f64, write_csv, write_json, write_jsonl, write_text};
use super::{CliError, Context};
use crate::corpus::{load_triples, read_annotations, Dimension};
use crate::qa::{error_analysis, filter_discrepant, iaa, qualify, znormalize, CorrCell, CorrelationGrid, ErrorCountRecord};

#[derive(Debug, Clone, Args)]
pub struct QaArgs {
    /// Annotation JSONL.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Triples JSONL; enables span checks and error analytics.
    #[arg(long)]
    pub triples: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaSummary {
    pub dimension: Dimension,
    pub annotations: usize,
    pub segments_scored: usize,
    pub dropped: usize,
    pub dropped_segments: Vec<String>,
    pub singletons: usize,
    pub singleton_segments: Vec<String>,
    pub iaa_mean: Option<f64>,
    pub iaa_segments: Option<usize>,
    pub error_records: Option<usize>,
}

/// Writes `segment_scores.jsonl`, `minmax.json`, `iaa.{json,csv}` (when defined),
/// `qa_summary.{json,txt}` and, given triples, `error_counts.csv` and
/// `error_correlations.csv`.
pub fn qa(ctx: &Context, args: &QaArgs) -> Result<QaSummary, CliError> {
    let cfg = &ctx.config.qa;
    cfg.validate()?;
    let triples = args.triples.as_ref().map(load_triples).transpose()?;
    let annotations = read_annotations(&args.annotations, triples.as_ref())?;
    let outcome = qualify(&annotations, cfg)?;
    write_jsonl(&ctx.out.join("segment_scores.jsonl"), &outcome.scores)?;
    write_json(&ctx.out.join("minmax.json"), &outcome.bounds)?;

    // agreement is measured on the annotations that survive the filter
    let kept = filter_discrepant(&annotations, cfg.discrepancy_threshold).kept_annotations();
    let iaa_report = match iaa(&kept, cfg.iaa_repeats, ctx.seed) {
        Ok(r) => {
            write_json(&ctx.out.join("iaa.json"), &r)?;
            let rows: Vec<Vec<String>> = r
                .per_repeat
                .iter()
                .enumerate()
                .map(|(i, v)| vec![i.to_string(), v.to_string()])
                .collect();
            write_csv(&ctx.out.join("iaa.csv"), &["repeat".into(), "pearson".into()], &rows)?;
            Some(r)
        }
        Err(e) => {
            log::warn!("inter-annotator agreement undefined: {e}");
            None
        }
    };

    let mut error_records = None;
    if let Some(triples) = &triples {
        let z = znormalize(&annotations);
        match error_analysis(&annotations, &z, triples, cfg.low_da_no_span_threshold) {
            Ok((records, grid)) => {
                write_error_counts(ctx, outcome.dimension, &records)?;
                write_grid(ctx, &grid)?;
                error_records = Some(records.len());
            }
            Err(e) => log::warn!("error analytics skipped: {e}"),
        }
    }

    let summary = QaSummary {
        dimension: outcome.dimension,
        annotations: annotations.len(),
        segments_scored: outcome.scores.len(),
        dropped: outcome.dropped.len(),
        dropped_segments: outcome.dropped.clone(),
        singletons: outcome.singletons.len(),
        singleton_segments: outcome.singletons.clone(),
        iaa_mean: iaa_report.as_ref().map(|r| r.mean),
        iaa_segments: iaa_report.as_ref().map(|r| r.segments),
        error_records,
    };
    write_json(&ctx.out.join("qa_summary.json"), &summary)?;
    let rows = vec![
        vec!["dimension".into(), summary.dimension.as_str().to_string()],
        vec!["annotations".into(), summary.annotations.to_string()],
        vec!["segments scored".into(), summary.segments_scored.to_string()],
        vec!["dropped (discrepant)".into(), summary.dropped.to_string()],
        vec!["singletons".into(), summary.singletons.to_string()],
        vec![
            "IAA (Pearson)".into(),
            summary.iaa_mean.map(fmt_f64).unwrap_or_else(|| "NA".into()),
        ],
    ];
    let text = aligned_table(&["field".into(), "value".into()], &rows);
    write_text(&ctx.out.join("qa_summary.txt"), &text)?;
    print!("{text}");
    Ok(summary)
}

fn write_error_counts(ctx: &Context, dimension: Dimension, records: &[ErrorCountRecord]) -> Result<(), CliError> {
    let categories = dimension.categories();
    let mut header: Vec<String> = ["segment_id", "evaluator_id", "da_score", "z_score"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(categories.iter().map(|c| c.as_str().to_string()));
    header.push("total_errors".into());
    header.push("avg_error".into());
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![
                r.segment_id.clone(),
                r.evaluator_id.clone(),
                r.da_score.to_string(),
                r.z_score.map(|z| z.to_string()).unwrap_or_default(),
            ];
            row.extend(categories.iter().map(|&c| r.count(c).to_string()));
            row.push(r.total_errors.to_string());
            row.push(r.avg_error.to_string());
            row
        })
        .collect();
    write_csv(&ctx.out.join("error_counts.csv"), &header, &rows)
}

fn write_grid(ctx: &Context, grid: &CorrelationGrid) -> Result<(), CliError> {
    let mut header = vec!["error".to_string()];
    header.extend(CorrelationGrid::column_names());
    let rows: Vec<Vec<String>> = grid
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.label.clone()];
            row.extend(r.cells.iter().map(|c| match c {
                CorrCell::Value(v) => v.to_string(),
                CorrCell::Undefined { .. } => "NA".to_string(),
            }));
            row
        })
        .collect();
    write_csv(&ctx.out.join("error_correlations.csv"), &header, &rows)?;
    let pretty: Vec<Vec<String>> = grid
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.label.clone()];
            row.extend(r.cells.iter().map(|c| c.to_string()));
            row
        })
        .collect();
    write_text(&ctx.out.join("error_correlations.txt"), &aligned_table(&header, &pretty))
}
