use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use super::output::{write_csv, write_json};
use super::{CliError, Context};
use crate::corpus::{load_triples, SegmentScore, Split};
use crate::embeddings::EmbeddingProvider;
use crate::estimator::{
    pool, save_model, EstimatorMode, EstimatorModel, SentenceEmbedding, TrainExample, TrainHistory,
};
use crate::qa::MinMax;

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Triples JSONL. `dev` rows validate, `devtest` rows are held out,
    /// everything else trains.
    #[arg(long)]
    pub triples: PathBuf,
    /// Segment scores JSONL as written by `qa`.
    #[arg(long)]
    pub scores: PathBuf,
    /// `minmax.json` from `qa`; fitted on the score file when absent.
    #[arg(long)]
    pub minmax: Option<PathBuf>,
    #[arg(long, default_value = "stl_ref")]
    pub mode: EstimatorMode,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub grad_accum: Option<usize>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "2048,1024")]
    pub hidden: Vec<usize>,
}

pub(crate) fn read_segment_scores(path: &Path) -> Result<Vec<SegmentScore>, CliError> {
    let file = File::open(path).map_err(|e| CliError::data(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: SegmentScore = serde_json::from_str(&line)
            .map_err(|e| CliError::data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(s);
    }
    Ok(out)
}

/// Pools every distinct text once.
pub(crate) struct EmbeddingCache<'a> {
    provider: &'a dyn EmbeddingProvider,
    pooled: HashMap<String, SentenceEmbedding>,
}

impl<'a> EmbeddingCache<'a> {
    pub fn new(provider: &'a dyn EmbeddingProvider) -> Self {
        EmbeddingCache {
            provider,
            pooled: HashMap::new(),
        }
    }

    pub fn get(&mut self, text: &str) -> Result<SentenceEmbedding, crate::embeddings::EmbedError> {
        if let Some(e) = self.pooled.get(text) {
            return Ok(e.clone());
        }
        let e = pool(&self.provider.embed(text)?);
        self.pooled.insert(text.to_string(), e.clone());
        Ok(e)
    }
}

/// Writes `model.ckpt`, `history.csv` and `train_summary.json`.
pub fn train(ctx: &Context, args: &TrainArgs) -> Result<(EstimatorModel, TrainHistory), CliError> {
    let mut cfg = ctx.config.train.clone();
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.grad_accum {
        cfg.grad_accumulation = v;
    }
    cfg.rng_seed = ctx.seed;
    cfg.validate()?;

    let triples = load_triples(&args.triples)?;
    let scores = read_segment_scores(&args.scores)?;
    let bounds = match &args.minmax {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<MinMax>(&text)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        }
        None => MinMax::fit(&scores.iter().map(|s| s.z_mean).collect::<Vec<_>>())?,
    };
    let mut targets = BTreeMap::new();
    for s in &scores {
        if triples.get(&s.segment_id).is_none() {
            return Err(CliError::data(format!("score for unknown segment {:?}", s.segment_id)));
        }
        let t = s.scaled.unwrap_or_else(|| bounds.scale(s.z_mean));
        if targets.insert(s.segment_id.clone(), t).is_some() {
            return Err(CliError::data(format!("duplicate score for segment {:?}", s.segment_id)));
        }
    }

    let provider = ctx.config.provider.build()?;
    let mut cache = EmbeddingCache::new(provider.as_ref());
    let (mut train_set, mut valid) = (Vec::new(), Vec::new());
    let (mut unscored, mut held_out) = (0usize, 0usize);
    for t in triples.iter() {
        let Some(&target) = targets.get(&t.segment_id) else {
            unscored += 1;
            continue;
        };
        if t.split == Split::Devtest {
            held_out += 1;
            continue;
        }
        if args.mode.needs_reference() && t.reference.is_none() {
            return Err(CliError::validation(format!(
                "mode {} needs references; segment {:?} has none",
                args.mode, t.segment_id
            )));
        }
        let example = TrainExample {
            src: cache.get(&t.src)?,
            mt: cache.get(&t.mt)?,
            reference: match (&t.reference, args.mode.needs_reference()) {
                (Some(r), true) => Some(cache.get(r)?),
                _ => None,
            },
            target,
        };
        if t.split == Split::Dev {
            valid.push(example);
        } else {
            train_set.push(example);
        }
    }
    log::info!(
        "{} training, {} validation examples; {unscored} triples without scores, {held_out} devtest rows held out",
        train_set.len(),
        valid.len()
    );

    let mut initial = EstimatorModel::new(args.mode, provider.descriptor().clone(), &args.hidden, ctx.seed)?;
    initial.set_bounds(bounds);
    let (model, history) = crate::estimator::train(&initial, &train_set, &valid, &cfg)?;

    std::fs::create_dir_all(&ctx.out).map_err(|e| CliError::internal(format!("{}: {e}", ctx.out.display())))?;
    save_model(&model, ctx.out.join("model.ckpt")).map_err(|e| CliError::internal(e.to_string()))?;
    let rows: Vec<Vec<String>> = history
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                e.train_mse.to_string(),
                e.valid_spearman.map(|v| v.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &ctx.out.join("history.csv"),
        &["epoch".into(), "train_mse".into(), "valid_spearman".into()],
        &rows,
    )?;
    write_json(
        &ctx.out.join("train_summary.json"),
        &json!({
            "mode": args.mode,
            "train_examples": train_set.len(),
            "valid_examples": valid.len(),
            "unscored_triples": unscored,
            "held_out": held_out,
            "initial_train_mse": history.initial_train_mse,
            "final_train_mse": history.epochs.last().map(|e| e.train_mse),
            "best_epoch": history.best_epoch,
            "config": cfg,
        }),
    )?;
    Ok((model, history))
}
