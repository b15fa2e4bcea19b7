use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wmse_sim::record::write_csv;
use wmse_sim::sweep::{run_sweep, with_threads};
use wmse_sim::verify::run_verify;
use wmse_sim::{Experiment, SimConfig, SimError};

/// Monte Carlo experiments for weighted-MSE transceiver designs.
#[derive(Parser)]
#[command(name = "wmse-sim", version)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path; defaults to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a configuration key, e.g. `--set trials=20`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Weighted MSE of permutation choices versus SNR.
    WmseSweep,
    /// Sum-MSE of the equalizer-only and joint designs versus SNR.
    SummseSweep,
    /// Uncoded QPSK bit error rate of the link designs versus SNR.
    BerSweep,
    /// Sum-MSE and rate along an α-tilted family of Pareto points.
    Pareto,
    /// Run the invariant and oracle suite.
    Verify,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, SimError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_config(cli: &Cli, experiment: Experiment) -> Result<SimConfig, SimError> {
    let mut cfg = SimConfig::defaults(experiment);
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| SimError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate(experiment)?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool, SimError> {
    let experiment = match cli.command {
        Command::WmseSweep => Experiment::WmseSweep,
        Command::SummseSweep => Experiment::SumMseSweep,
        Command::BerSweep => Experiment::BerSweep,
        Command::Pareto => Experiment::Pareto,
        Command::Verify => {
            let seed = cli.seed.unwrap_or(1);
            let report = with_threads(cli.threads, || run_verify(seed))?;
            let mut out = output(&cli.out)?;
            out.write_all(report.render().as_bytes())?;
            out.flush()?;
            return Ok(report.passed());
        }
    };
    let cfg = build_config(cli, experiment)?;
    let records = with_threads(cli.threads, || run_sweep(&cfg, experiment))??;
    let mut out = output(&cli.out)?;
    write_csv(&records, &mut out)?;
    out.flush()?;
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("wmse-sim: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
