use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::output::write_jsonl;
use super::train::EmbeddingCache;
use super::{CliError, Context};
use crate::corpus::load_triples;
use crate::embeddings::EmbedError;
use crate::estimator::{load_model, EstimatorError, EstimatorMode, Prediction};
use crate::stats::mean_impute;

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub triples: PathBuf,
    /// Score from `<src, mt>` only, ignoring references.
    #[arg(long)]
    pub qe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub segment_id: String,
    pub score: f64,
    pub descaled: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heads: Option<[f64; 3]>,
    /// Set when embedding failed and the score is the mean of the others.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub imputed: bool,
}

/// Writes `scores.jsonl`, one record per triple in input order.
pub fn score(ctx: &Context, args: &ScoreArgs) -> Result<Vec<ScoreRecord>, CliError> {
    let model = load_model(&args.checkpoint)?;
    if args.qe && model.mode() == EstimatorMode::StlRef {
        return Err(EstimatorError::QeUnsupported.into());
    }
    let triples = load_triples(&args.triples)?;
    let provider = ctx.config.provider.build()?;
    model.check_provider(provider.as_ref())?;
    let uses_reference = model.mode().needs_reference() && !args.qe;
    let mut cache = EmbeddingCache::new(provider.as_ref());
    let mut predictions: Vec<Option<Prediction>> = Vec::with_capacity(triples.len());
    for t in triples.iter() {
        if uses_reference && t.reference.is_none() {
            return Err(CliError::validation(format!(
                "{} model needs a reference; segment {:?} has none (use --qe for reference-free scoring)",
                model.mode(),
                t.segment_id
            )));
        }
        let embedded = (|| -> Result<_, EmbedError> {
            let src = cache.get(&t.src)?;
            let mt = cache.get(&t.mt)?;
            let reference = match (&t.reference, uses_reference) {
                (Some(r), true) => Some(cache.get(r)?),
                _ => None,
            };
            Ok((src, mt, reference))
        })();
        match embedded {
            Ok((src, mt, reference)) => {
                predictions.push(Some(model.score_embeddings(&src, &mt, reference.as_ref(), args.qe)?));
            }
            Err(e) => {
                log::warn!("segment {:?} could not be embedded ({e}); imputing", t.segment_id);
                predictions.push(None);
            }
        }
    }
    let records = if predictions.is_empty() {
        Vec::new()
    } else {
        let filled = mean_impute(&predictions.iter().map(|p| p.map(|p| p.score)).collect::<Vec<_>>())?;
        triples
            .iter()
            .zip(&predictions)
            .zip(filled)
            .map(|((t, p), score)| ScoreRecord {
                segment_id: t.segment_id.clone(),
                score,
                descaled: p.map(|p| p.descaled).unwrap_or_else(|| model.bounds().unscale(score)),
                heads: p.and_then(|p| p.heads),
                imputed: p.is_none(),
            })
            .collect()
    };
    write_jsonl(&ctx.out.join("scores.jsonl"), &records)?;
    Ok(records)
}
