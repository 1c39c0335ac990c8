//! `mtbench` command-line interface.

mod compare;
mod embed_cache;
mod error;
mod output;
mod qa;
mod score;
mod train;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use compare::{compare, read_score_file, CompareArgs, CompareReport, LpRow, MetricCell};
pub use embed_cache::{embed_cache, EmbedCacheArgs};
pub use error::{CliError, ErrorKind};
pub use qa::{qa, QaArgs, QaSummary};
pub use score::{score, ScoreArgs, ScoreRecord};
pub use train::{train, TrainArgs};

use crate::embeddings::ProviderConfig;
use crate::estimator::TrainConfig;
use crate::qa::QaConfig;
use crate::service::ServiceConfig;

/// Contents of the `--config` TOML file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub qa: QaConfig,
    pub train: TrainConfig,
    pub provider: ProviderConfig,
    pub service: ServiceConfig,
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(AppConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::validation(format!("invalid config {}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "mtbench", version, about = "Machine-translation evaluation workbench")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter, normalise and analyse raw annotations.
    Qa(QaArgs),
    /// Train an estimator on quality-assured scores.
    Train(TrainArgs),
    /// Score triples with a trained checkpoint.
    Score(ScoreArgs),
    /// Correlate metrics with human scores per language pair and rank them.
    Compare(CompareArgs),
    /// Run the annotation service.
    Serve,
    /// Fill an embedding file store from a remote encoder.
    EmbedCache(EmbedCacheArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Qa(_) => "qa",
            Command::Train(_) => "train",
            Command::Score(_) => "score",
            Command::Compare(_) => "compare",
            Command::Serve => "serve",
            Command::EmbedCache(_) => "embed-cache",
        }
    }
}

/// Global options shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: AppConfig,
    pub seed: u64,
    pub out: PathBuf,
}

/// Runs a parsed command. Outputs land in `cli.out`; a `run_metadata.json`
/// sidecar records timing so the outputs themselves stay reproducible.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let started_at = chrono::Utc::now();
    let config = AppConfig::load(cli.config.as_deref())?;
    let ctx = Context {
        config,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    let name = cli.command.name();
    match &cli.command {
        Command::Serve => return serve(&ctx),
        Command::Qa(args) => qa(&ctx, args).map(|_| ())?,
        Command::Train(args) => train(&ctx, args).map(|_| ())?,
        Command::Score(args) => score(&ctx, args).map(|_| ())?,
        Command::Compare(args) => compare(&ctx, args).map(|_| ())?,
        Command::EmbedCache(args) => embed_cache(&ctx, args).map(|_| ())?,
    }
    let metadata = serde_json::json!({
        "command": name,
        "seed": cli.seed,
        "config": cli.config,
        "version": env!("CARGO_PKG_VERSION"),
        "started_at": started_at.to_rfc3339(),
        "finished_at": chrono::Utc::now().to_rfc3339(),
    });
    output::write_json(&ctx.out.join("run_metadata.json"), &metadata)
}

fn serve(ctx: &Context) -> Result<(), CliError> {
    let config = ctx.config.service.clone().with_env().map_err(CliError::from)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::internal(format!("tokio runtime: {e}")))?;
    runtime
        .block_on(crate::service::serve(&config))
        .map_err(|e| CliError::internal(format!("service stopped: {e}")))
}

/// Entry point used by the binary: parses arguments, runs, and maps the
/// outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ErrorKind::Validation.exit_code() } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.kind.exit_code()
        }
    }
}
