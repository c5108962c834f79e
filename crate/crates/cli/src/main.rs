use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod report;

use config::ExperimentConfig;

/// Tempered-transitions experiments: tune ladders, estimate g-curves, run
/// chains and analyse traces.
#[derive(Debug, Parser)]
#[command(name = "tempered", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for grid points and replicates.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the ladder and report S_n for geometric, uniform and selected spacings.
    Tune,
    /// Estimate g(β) and g′(β) on a grid and flag disagreeing estimators.
    EstimateG,
    /// Run tempered-transition chains.
    Sample,
    /// Acceptance rate and autocorrelation times of a trace.
    Analyze {
        /// Trace to read; defaults to trace.csv in the output directory.
        trace: Option<PathBuf>,
    },
}

/// Exit code 2 for numerical failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|e| {
        e.downcast_ref::<tempered_core::Error>().is_some_and(tempered_core::Error::is_numerical)
    });
    if numerical {
        2
    } else {
        1
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli.config.context("--config is required")?;
    let mut config = ExperimentConfig::load(&path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out = out;
    }
    config.validate()?;
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let out = config.out.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Tune => commands::tune(&config, &out),
        Command::EstimateG => commands::estimate_g(&config, &out),
        Command::Sample => commands::sample(&config, &out),
        Command::Analyze { trace } => commands::analyze(&config, trace, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
