use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};

use mwcsim::cli::{parse_config, run_experiment, write_atomic};

#[derive(Parser)]
#[command(
    name = "mwcsim",
    version,
    about = "Link-level simulator for cloud-aided multi-way buffer-aided relay networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file and emit a results CSV.
    Simulate {
        /// Plain-text key=value config file.
        config: PathBuf,
        /// Write the CSV here (atomically) instead of to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cap on concurrent worker threads; defaults to all cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Master seed every per-run seed derives from.
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
    },
}

fn simulate(
    config: &Path,
    out: Option<&Path>,
    workers: Option<usize>,
    master_seed: u64,
) -> anyhow::Result<bool> {
    let experiment = parse_config(config)
        .with_context(|| format!("could not load config {}", config.display()))?;
    let started = Instant::now();
    let outcome = run_experiment(&experiment, master_seed, workers)
        .context("experiment sweep failed")?;
    eprintln!(
        "{}: {} rows in {:.1}s",
        experiment.name,
        outcome.csv.lines().count().saturating_sub(1),
        started.elapsed().as_secs_f64()
    );
    for failure in &outcome.failures {
        eprintln!("{failure}");
    }
    match out {
        Some(path) => write_atomic(path, &outcome.csv)
            .with_context(|| format!("could not write {}", path.display()))?,
        None => print!("{}", outcome.csv),
    }
    Ok(outcome.all_succeeded())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            workers,
            master_seed,
        } => simulate(&config, out.as_deref(), workers, master_seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
