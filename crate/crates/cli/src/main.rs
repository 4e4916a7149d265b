use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod commands;
mod output;
mod settings;

use settings::Settings;

/// Ranking response surfaces with neural networks, and pricing Bermudan
/// max-calls with learned stopping rules.
#[derive(Debug, Parser)]
#[command(name = "surfrank", version)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Plain-text key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a classifier on a synthetic ranking example and score it.
    Rank(RankArgs),
    /// Train (or load) decision maps and price a Bermudan max-call.
    Price(PriceArgs),
    /// Price the two-asset Bermudan max-call on a binomial lattice.
    Lattice(LatticeArgs),
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// 1d, 2d or 10d.
    #[arg(long)]
    pub example: Option<String>,
    /// unif, lhs or file:<path>.
    #[arg(long)]
    pub design: Option<String>,
    /// Label the design with noisy surface samples.
    #[arg(long)]
    pub noisy: bool,
    /// Design budget.
    #[arg(long)]
    pub m: Option<usize>,
    /// feedforward or unet.
    #[arg(long)]
    pub net: Option<String>,
    /// Hidden widths of the feed-forward net, e.g. 16,16.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Channels of the UNet's first block.
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Samples per step (pixels per step for the UNet).
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// Number of assets.
    #[arg(long)]
    pub d: Option<usize>,
    /// Initial price of every asset, or one value per asset (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<f64>>,
    /// desk (16000 paths x 20 repetitions) or paper (160000 x 100).
    #[arg(long)]
    pub scale: Option<String>,
    /// Out-of-sample paths per repetition (overrides the scale).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Pricing repetitions (overrides the scale).
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Load decision maps from this directory instead of training.
    #[arg(long)]
    pub maps: Option<PathBuf>,
    /// Design points per date.
    #[arg(long)]
    pub m: Option<usize>,
    /// unif, lhs or file:<path>.
    #[arg(long)]
    pub design: Option<String>,
    /// Inner paths per design point.
    #[arg(long)]
    pub inner_paths: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub dividend: Option<f64>,
    #[arg(long)]
    pub vol: Option<f64>,
    #[arg(long)]
    pub strike: Option<f64>,
    #[arg(long)]
    pub maturity: Option<f64>,
    /// Number of exercise dates after time 0.
    #[arg(long)]
    pub dates: Option<usize>,
    /// Points per axis of the exported decision-map grids.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    /// Initial price of both assets, or two comma-separated values.
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<f64>>,
    /// Lattice steps between exercise dates.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Also price at these step counts, e.g. 5,10,20,40.
    #[arg(long, value_delimiter = ',')]
    pub table: Option<Vec<usize>>,
    /// Exercise at maturity only.
    #[arg(long)]
    pub european_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting the worker pool")?;
    }
    let settings = Settings::load(cli.config.as_deref())?;
    match cli.command {
        Command::Rank(args) => commands::rank::run(&args, settings),
        Command::Price(args) => commands::price::run(&args, settings),
        Command::Lattice(args) => commands::lattice::run(&args, settings),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
