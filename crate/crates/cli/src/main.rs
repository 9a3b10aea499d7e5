use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use misalign_tomo::{
    run_experiment, verify_experiment, ExperimentConfig, ExperimentId, EXIT_CONFIG,
    EXIT_NUMERICAL, EXIT_VERIFY,
};

#[derive(Parser)]
#[command(name = "misalign-tomo", about = "Reproduce misalignment-robustness experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON)
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's restart count
    #[arg(long)]
    restarts: Option<usize>,
    /// Worker threads (env MISALIGN_TOMO_THREADS takes precedence)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (default: the config's out_dir, or "out")
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV/JSON outputs plus a manifest
    Run(RunArgs),
    /// Re-check stored outputs against the closed-form oracles
    Verify(RunArgs),
    /// List the available experiment ids
    ListExperiments,
}

fn effective_threads(flag: Option<usize>) -> Option<usize> {
    match std::env::var("MISALIGN_TOMO_THREADS") {
        Ok(v) => v.parse::<usize>().ok().or(flag),
        Err(_) => flag,
    }
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, String, PathBuf), String> {
    let (mut config, hash) =
        ExperimentConfig::from_file(&args.config).map_err(|e| format!("{e:#}"))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(restarts) = args.restarts {
        config.restarts = restarts;
    }
    config.threads = effective_threads(args.threads).or(config.threads);
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((config, hash, out_dir))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let (config, hash, out_dir) = match load(&args) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            match run_experiment(&config, &hash, &out_dir) {
                Ok(outcome) => {
                    for path in &outcome.outputs {
                        println!("wrote {}", path.display());
                    }
                    if let Some(msg) = outcome.numerical_failure {
                        eprintln!("numerical failure: {msg} (partial outputs kept)");
                        return ExitCode::from(EXIT_NUMERICAL as u8);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("numerical failure: {e:#}");
                    ExitCode::from(EXIT_NUMERICAL as u8)
                }
            }
        }
        Command::Verify(args) => {
            let (config, _, out_dir) = match load(&args) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            match verify_experiment(&config, &out_dir) {
                Ok(report) => {
                    for line in &report.lines {
                        println!("{line}");
                    }
                    if report.failed {
                        ExitCode::from(EXIT_VERIFY as u8)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("verification error: {e:#}");
                    ExitCode::from(EXIT_VERIFY as u8)
                }
            }
        }
        Command::ListExperiments => {
            for (id, blurb) in ExperimentId::all() {
                println!("{:<12} {blurb}", id.name());
            }
            ExitCode::SUCCESS
        }
    }
}
