//! `mfel`: run the depression-signal pipeline from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{FileConfig, Overrides, Settings};

#[derive(Parser, Debug)]
#[command(name = "mfel", version, about = "Multimodal feature extraction and ensemble evaluation for user timelines")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Sectioned TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed recorded in every artifact.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Never touch the network; uncached URLs are reported and skipped.
    #[arg(long, global = true)]
    offline: bool,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Labeled corpus in JSON Lines, one user per line.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// URL title cache file.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Number of stratified cross-validation folds.
    #[arg(long, global = true, conflicts_with = "holdout")]
    folds: Option<usize>,
    /// Test fraction of a single stratified holdout split.
    #[arg(long, global = true)]
    holdout: Option<f64>,
    /// Modalities to leave out, e.g. `v` or `t,u`.
    #[arg(long, global = true)]
    drop: Option<String>,
    /// Use raw lexicon counts instead of per-token frequencies.
    #[arg(long, global = true)]
    raw_counts: bool,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// URL and image coverage of the corpus.
    Stats,
    /// Resolve page titles for every distinct URL into the cache.
    FetchTitles,
    /// Fit the featurizer and write the feature matrix with its manifest.
    Featurize,
    /// Fit the featurizer and ensemble on the corpus and save a model bundle.
    Train,
    /// Cross-validate LR, XGB, NN and the voting ensemble.
    Evaluate,
    /// Leave-one-modality-out comparison of the ensemble.
    Ablate,
    /// Exhaustive hyper-parameter search for one model.
    Gridsearch(GridArgs),
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Model to tune: lr, xgb, nn or mfel.
    #[arg(long, default_value = "mfel")]
    model: String,
    /// TOML or JSON table of parameter name to candidate values.
    #[arg(long)]
    grid: PathBuf,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = cli.global;
    let file = match &g.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let settings = Settings::resolve(
        file,
        Overrides {
            dataset: g.dataset,
            cache: g.cache,
            offline: g.offline,
            seed: g.seed,
            out: g.out,
            folds: g.folds,
            holdout: g.holdout,
            drop: g.drop,
            raw_counts: g.raw_counts,
        },
    )?;
    match cli.command {
        Command::Stats => commands::stats(&settings),
        Command::FetchTitles => commands::fetch_titles(&settings),
        Command::Featurize => commands::featurize(&settings),
        Command::Train => commands::train(&settings),
        Command::Evaluate => commands::evaluate(&settings),
        Command::Ablate => commands::ablate(&settings),
        Command::Gridsearch(a) => commands::gridsearch(&settings, &a.model, &a.grid),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
