use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use weighted_ase_cli::commands::{self, Context};
use weighted_ase_cli::config::{ExperimentConfig, Task};
use weighted_ase_cli::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "weighted-ase",
    version,
    about = "Spectral embedding experiments on weighted stochastic block models"
)]
struct Cli {
    /// Experiment config (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the config's "output", else ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sections
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph from the model: edges.csv, labels.csv
    Simulate,
    /// Spectral embedding: embedding.csv, eigenvalues.json
    Embed,
    /// Oracle alignment onto the latent positions: align.json, aligned.csv
    Align,
    /// Size-adjusted Chernoff information of the model: chernoff.json
    Chernoff,
    /// Chernoff grid over model parameters: sweep.csv
    Sweep,
    /// Gaussian mixture clustering of the embedding: cluster.json
    Cluster,
    /// Compare aligned residuals with the limiting covariances: clt_check.json
    CltCheck,
    /// Two-day edge-weight prediction: predict.json, predictions_*.csv
    Predict,
    /// Run every task listed in the config: report.json
    Pipeline,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))?;
    }
    let config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    config.validate()?;
    let seed = cli.seed.unwrap_or(config.seed);
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(commands::default_out);
    let ctx = Context::new(config, out, seed)?;
    let report = match cli.command {
        Command::Simulate => commands::simulate(&ctx)?,
        Command::Embed => commands::single(Task::Embed, &ctx)?,
        Command::Align => commands::single(Task::Align, &ctx)?,
        Command::Chernoff => commands::single(Task::Chernoff, &ctx)?,
        Command::Sweep => commands::single(Task::Sweep, &ctx)?,
        Command::Cluster => commands::single(Task::Cluster, &ctx)?,
        Command::CltCheck => commands::single(Task::CltCheck, &ctx)?,
        Command::Predict => commands::single(Task::Predict, &ctx)?,
        Command::Pipeline => serde_json::to_value(commands::pipeline(&ctx)?).expect("plain data"),
    };
    // A closed pipe downstream is not an error of ours.
    let _ = writeln!(
        std::io::stdout(),
        "{}",
        serde_json::to_string_pretty(&report).expect("plain data")
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
