mod config;
mod evaluate;
mod exit;
mod ingest;
mod predict;
mod prep;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ersn", version, about = "Mine and classify architecture-violation symptoms in code review comments")]
struct Cli {
    /// TOML run configuration (falls back to $ERSN_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch review comments from Gerrit into labeling-ready JSONL.
    Ingest(ingest::Args),
    /// Reduce an embedding table with PCA, optionally to a dataset's vocabulary.
    Prep(prep::Args),
    /// Balance, split, tune and train one classifier.
    Train(train::Args),
    /// Render a comparison table from trained bundles.
    Evaluate(evaluate::Args),
    /// Label comments with a bundle or an ensemble of bundles.
    Predict(predict::Args),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { 0 });
        }
    };
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Ingest(a) => ingest::run(a),
        Command::Prep(a) => prep::run(a, config),
        Command::Train(a) => train::run(a, config),
        Command::Evaluate(a) => evaluate::run(a, config),
        Command::Predict(a) => predict::run(a, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code_of(&e) as u8)
        }
    }
}
