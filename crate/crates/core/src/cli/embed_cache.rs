use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use super::output::write_json;
use super::{CliError, Context};
use crate::corpus::load_triples;
use crate::embeddings::{EmbeddingProvider, FileStore, RemoteProvider};

#[derive(Debug, Clone, Args)]
pub struct EmbedCacheArgs {
    #[arg(long)]
    pub triples: PathBuf,
    /// Base URL of the embedding sidecar.
    #[arg(long)]
    pub url: String,
    #[arg(long)]
    pub store_dir: PathBuf,
    /// Encoder identity; part of every cache key.
    #[arg(long)]
    pub identity: String,
    #[arg(long)]
    pub dim: usize,
    /// Texts per request.
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
}

/// Embeds every source, translation and reference text not yet in the store.
/// Returns `(stored, already_present)`.
pub fn embed_cache(ctx: &Context, args: &EmbedCacheArgs) -> Result<(usize, usize), CliError> {
    if args.batch == 0 {
        return Err(CliError::validation("--batch must be positive"));
    }
    let triples = load_triples(&args.triples)?;
    let store = FileStore::open(&args.store_dir, &args.identity, args.dim)?;
    let remote = RemoteProvider::new(&args.url, &args.identity, args.dim)?;
    let texts: BTreeSet<&str> = triples
        .iter()
        .flat_map(|t| [Some(t.src.as_str()), Some(t.mt.as_str()), t.reference.as_deref()])
        .flatten()
        .filter(|t| !t.trim().is_empty())
        .collect();
    let (missing, present): (Vec<&str>, Vec<&str>) = texts.into_iter().partition(|t| !store.contains(t));
    for chunk in missing.chunks(args.batch) {
        let matrices = remote.embed_batch(chunk)?;
        for (text, m) in chunk.iter().zip(&matrices) {
            store.store(text, m)?;
        }
    }
    log::info!("stored {} new matrices, {} already cached", missing.len(), present.len());
    write_json(
        &ctx.out.join("embed_cache_summary.json"),
        &json!({ "stored": missing.len(), "already_present": present.len(), "identity": args.identity }),
    )?;
    Ok((missing.len(), present.len()))
}
