use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::output::{aligned_table, fmt_f64, write_csv, write_json, write_text};
use super::{CliError, Context};
use crate::corpus::load_triples;
use crate::stats::{kendall, pearson, rank_metrics, spearman, CorrelationKind, PairedScores, SignificanceMatrix};

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Human scores JSONL (`segment_id` with `score` or `z_mean`).
    #[arg(long)]
    pub human: PathBuf,
    /// Metric scores as NAME=PATH; repeat for each metric.
    #[arg(long = "metric", value_parser = parse_metric, required = true)]
    pub metrics: Vec<(String, PathBuf)>,
    /// Triples JSONL, used to group segments by language pair.
    #[arg(long)]
    pub triples: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Correlation used for significance ranks.
    #[arg(long, default_value = "spearman")]
    pub corr: CorrelationKind,
}

fn parse_metric(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub metric: String,
    pub pearson: f64,
    pub spearman: f64,
    pub kendall: f64,
    /// Significance rank; absent on the averaged row.
    pub rank: Option<usize>,
    pub bold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub lp: String,
    pub segments: usize,
    pub cells: Vec<MetricCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub metrics: Vec<String>,
    pub rows: Vec<LpRow>,
    pub average: LpRow,
    pub significance: BTreeMap<String, SignificanceMatrix>,
}

#[derive(Deserialize)]
struct ScoreLine {
    segment_id: String,
    score: Option<f64>,
    z_mean: Option<f64>,
}

/// Reads `segment_id -> value` from JSONL, taking `score` or else `z_mean`.
pub fn read_score_file(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let where_ = || format!("{} line {}", path.display(), i + 1);
        let rec: ScoreLine =
            serde_json::from_str(&line).map_err(|e| CliError::data(format!("{}: {e}", where_())))?;
        let value = rec
            .score
            .or(rec.z_mean)
            .ok_or_else(|| CliError::data(format!("{}: neither score nor z_mean", where_())))?;
        if !value.is_finite() {
            return Err(CliError::data(format!("{}: non-finite score", where_())));
        }
        if out.insert(rec.segment_id.clone(), value).is_some() {
            return Err(CliError::data(format!("{}: duplicate segment {:?}", where_(), rec.segment_id)));
        }
    }
    Ok(out)
}

/// Writes `report.csv`, `report.txt` and `significance.json`.
pub fn compare(ctx: &Context, args: &CompareArgs) -> Result<CompareReport, CliError> {
    if args.runs == 0 {
        return Err(CliError::validation("--runs must be positive"));
    }
    let mut names: Vec<&str> = args.metrics.iter().map(|(n, _)| n.as_str()).collect();
    names.sort();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::validation("metric names must be unique"));
    }
    let triples = load_triples(&args.triples)?;
    let human = read_score_file(&args.human)?;
    let metrics: Vec<(String, BTreeMap<String, f64>)> = args
        .metrics
        .iter()
        .map(|(n, p)| Ok((n.clone(), read_score_file(p)?)))
        .collect::<Result<_, CliError>>()?;

    if let Some(unknown) = human.keys().find(|id| triples.get(id).is_none()) {
        return Err(CliError::data(format!("human score for unknown segment {unknown:?}")));
    }
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for t in triples.iter().filter(|t| human.contains_key(&t.segment_id)) {
        groups.entry(t.lp.to_string()).or_default().push(t.segment_id.clone());
    }
    if groups.is_empty() {
        return Err(CliError::data("no human-scored segments"));
    }

    let mut rows = Vec::new();
    let mut significance = BTreeMap::new();
    for (lp, mut segs) in groups {
        segs.sort();
        let h: Vec<f64> = segs.iter().map(|s| human[s]).collect();
        let mut paired = Vec::with_capacity(metrics.len());
        for (name, scores) in &metrics {
            let values = segs
                .iter()
                .map(|s| {
                    scores.get(s).copied().ok_or_else(|| {
                        CliError::data(format!("metric {name:?} has no score for segment {s:?} ({lp})"))
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            paired.push((name.clone(), PairedScores::new(segs.clone(), values, h.clone())?));
        }
        let (matrix, ranking) = rank_metrics(&paired, args.alpha, args.runs, ctx.seed, args.corr)?;
        let cells = paired
            .iter()
            .map(|(name, p)| {
                let rank = ranking.get(name).map(|e| e.rank);
                Ok(MetricCell {
                    metric: name.clone(),
                    pearson: pearson(&p.metric, &p.human)?,
                    spearman: spearman(&p.metric, &p.human)?,
                    kendall: kendall(&p.metric, &p.human)?,
                    rank,
                    bold: rank == Some(1),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        significance.insert(lp.clone(), matrix);
        rows.push(LpRow {
            lp,
            segments: segs.len(),
            cells,
        });
    }

    let n = rows.len() as f64;
    let average = LpRow {
        lp: "Avg".into(),
        segments: rows.iter().map(|r| r.segments).sum(),
        cells: metrics
            .iter()
            .enumerate()
            .map(|(i, (name, _))| MetricCell {
                metric: name.clone(),
                pearson: rows.iter().map(|r| r.cells[i].pearson).sum::<f64>() / n,
                spearman: rows.iter().map(|r| r.cells[i].spearman).sum::<f64>() / n,
                kendall: rows.iter().map(|r| r.cells[i].kendall).sum::<f64>() / n,
                rank: None,
                bold: false,
            })
            .collect(),
    };
    let report = CompareReport {
        metrics: metrics.iter().map(|(n, _)| n.clone()).collect(),
        rows,
        average,
        significance,
    };
    write_report(ctx, &report)?;
    Ok(report)
}

fn write_report(ctx: &Context, report: &CompareReport) -> Result<(), CliError> {
    let mut header = vec!["lp".to_string()];
    for m in &report.metrics {
        for suffix in ["pearson", "spearman", "kendall", "rank", "bold"] {
            header.push(format!("{m}_{suffix}"));
        }
    }
    let csv_row = |row: &LpRow| {
        let mut out = vec![row.lp.clone()];
        for c in &row.cells {
            out.push(c.pearson.to_string());
            out.push(c.spearman.to_string());
            out.push(c.kendall.to_string());
            out.push(c.rank.map(|r| r.to_string()).unwrap_or_default());
            out.push(if c.rank.is_some() { c.bold.to_string() } else { String::new() });
        }
        out
    };
    let mut rows: Vec<Vec<String>> = report.rows.iter().map(csv_row).collect();
    rows.push(csv_row(&report.average));
    write_csv(&ctx.out.join("report.csv"), &header, &rows)?;

    let mut text_header = vec!["lp".to_string()];
    for m in &report.metrics {
        text_header.extend([format!("{m} r"), format!("{m} rho"), format!("{m} tau"), format!("{m} rank")]);
    }
    let text_row = |row: &LpRow| {
        let mut out = vec![row.lp.clone()];
        for c in &row.cells {
            let mark = if c.bold { "*" } else { "" };
            out.push(fmt_f64(c.pearson));
            out.push(format!("{}{mark}", fmt_f64(c.spearman)));
            out.push(fmt_f64(c.kendall));
            out.push(c.rank.map(|r| r.to_string()).unwrap_or_else(|| "-".into()));
        }
        out
    };
    let mut text_rows: Vec<Vec<String>> = report.rows.iter().map(text_row).collect();
    text_rows.push(text_row(&report.average));
    let mut text = aligned_table(&text_header, &text_rows);
    text.push_str("* rank 1 (no other metric significantly better)\n");
    write_text(&ctx.out.join("report.txt"), &text)?;
    print!("{text}");
    write_json(&ctx.out.join("significance.json"), &report.significance)
}
