//! Batch driver for the gait synthesis and recognition pipeline.

mod commands;
mod config;
mod error;
mod io;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use config::PipelineConfig;
use error::{validation, CliError};

#[derive(Parser)]
#[command(name = "gaitsim", about = "synthetic gait pipeline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (also where upstream command outputs are read).
    #[arg(long)]
    out: PathBuf,
    /// Override the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Render shaded frame sequences with ground-truth cycles.
    Synth(Common),
    /// Extract binary silhouettes from rendered frames.
    Segment(Common),
    /// Detect gait cycles from silhouette sequences.
    Cycles(Common),
    /// Compute per-cycle GEI/GEnI feature archives.
    Features(Common),
    /// Aligned Jaccard statistics between two mask sets.
    Similarity(Common),
    /// Six-condition PCA+SVM identification experiment.
    Experiment(Common),
    /// Enumerate the azimuth/elevation viewpoint grid.
    Viewsweep(Common),
    /// Re-emit SVG figures from result CSVs.
    Plot(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Synth(c)
            | Command::Segment(c)
            | Command::Cycles(c)
            | Command::Features(c)
            | Command::Similarity(c)
            | Command::Experiment(c)
            | Command::Viewsweep(c)
            | Command::Plot(c) => c,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(validation("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| validation(format!("cannot configure {jobs} worker threads: {e}")))?;
    }
    let mut config = PipelineConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common.out.as_path();
    match &cli.command {
        Command::Synth(_) => commands::cmd_synth(&config, out),
        Command::Segment(_) => commands::cmd_segment(&config, out),
        Command::Cycles(_) => commands::cmd_cycles(&config, out),
        Command::Features(_) => commands::cmd_features(&config, out),
        Command::Similarity(_) => commands::cmd_similarity(&config, out),
        Command::Experiment(_) => commands::cmd_experiment(&config, out),
        Command::Viewsweep(_) => commands::cmd_viewsweep(&config, out),
        Command::Plot(_) => commands::cmd_plot(&config, out),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
