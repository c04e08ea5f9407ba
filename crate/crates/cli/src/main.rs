//! `paultrap`: file-based pipeline from trap geometry to verified transport.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 computation error.

mod diag;
mod pipeline;
mod report;
mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use paultrap::field::BasisCache;

use crate::run::{CliError, CliResult, Run};

#[derive(Parser, Debug)]
#[command(name = "paultrap", version, about = "Segmented 3D Paul trap design pipeline")]
struct Cli {
    /// Directory holding the artifacts of one run.
    #[arg(long, global = true, default_value = ".")]
    run_dir: PathBuf,
    /// Basis solve cache (defaults to <run-dir>/cache).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Leave creation timestamps out of CSVs and manifests.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the electrode layout and record the scenario.
    Geom(pipeline::ScenarioArgs),
    /// Solve the per-electrode basis fields.
    Solve(pipeline::SolveArgs),
    /// Pseudopotential profile and mode frequencies at the landmarks.
    Analyze(pipeline::AnalyzeArgs),
    /// Vary one geometry or drive parameter and record metrics.
    Sweep(pipeline::SweepArgs),
    /// Synthesize and verify a transport waveform.
    Waveform(pipeline::WaveformArgs),
    /// Play the waveform in the time domain and report motional excitation.
    Simulate(pipeline::SimulateArgs),
    /// Measurement conversion formulas.
    #[command(subcommand)]
    Diag(diag::DiagCommand),
    /// Collate the run's CSVs into a bundle grouped by plot.
    Report(report::ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Geom(_) => "geom",
            Command::Solve(_) => "solve",
            Command::Analyze(_) => "analyze",
            Command::Sweep(_) => "sweep",
            Command::Waveform(_) => "waveform",
            Command::Simulate(_) => "simulate",
            Command::Diag(_) => "diag",
            Command::Report(_) => "report",
        }
    }
}

fn cache(cli: &Cli) -> CliResult<BasisCache> {
    let dir = cli.cache_dir.clone().unwrap_or_else(|| cli.run_dir.join("cache"));
    Ok(BasisCache::on_disk(dir)?)
}

fn execute(cli: &Cli, argv: Vec<String>) -> CliResult<()> {
    let mut run = Run::new(cli.run_dir.clone(), !cli.no_timestamp, cli.command.name(), argv)?;
    match &cli.command {
        Command::Geom(a) => pipeline::geom(&mut run, a)?,
        Command::Solve(a) => pipeline::solve(&mut run, &cache(cli)?, a)?,
        Command::Analyze(a) => pipeline::analyze(&mut run, a)?,
        Command::Sweep(a) => pipeline::sweep_cmd(&mut run, &cache(cli)?, a)?,
        Command::Waveform(a) => pipeline::waveform(&mut run, a)?,
        Command::Simulate(a) => pipeline::simulate(&mut run, a)?,
        Command::Diag(d) => diag::diag(&mut run, d)?,
        Command::Report(a) => report::report(&mut run, a)?,
    }
    run.finish()
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Err(e) = execute(&cli, argv) {
        let err: CliError = e;
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
