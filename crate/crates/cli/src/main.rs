use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use rankforge_cli::{CliError, RunConfig};
use serde::Serialize;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Generate,
    Train,
    Tune,
    Predict,
    Evaluate,
    Plot,
}

/// Click-probability ranking pipeline.
///
/// Set RANKFORGE_THREADS to cap worker threads.
#[derive(Debug, Parser)]
#[command(name = "rankforge", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Replaces every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. For `generate`, the directory receiving
    /// impressions.csv and products.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit<T: Serialize>(value: T) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn run(args: Args) -> Result<(), CliError> {
    if let Some(n) = rankforge_cli::threads_from_env()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = args.out {
        if let Command::Generate = args.command {
            cfg.impressions = out.join("impressions.csv");
            cfg.products = out.join("products.csv");
        }
        cfg.output_dir = out;
    }
    match args.command {
        Command::Generate => emit(rankforge_cli::cmd_generate(&cfg)?),
        Command::Train => emit(rankforge_cli::cmd_train(&cfg)?),
        Command::Tune => emit(rankforge_cli::cmd_tune(&cfg)?),
        Command::Predict => emit(rankforge_cli::cmd_predict(&cfg)?),
        Command::Evaluate => emit(rankforge_cli::cmd_evaluate(&cfg)?),
        Command::Plot => emit(rankforge_cli::cmd_plot(&cfg)?),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: UsageError: {first}");
            return ExitCode::from(2);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
