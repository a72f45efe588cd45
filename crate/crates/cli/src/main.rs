use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use serde_json::json;

mod commands;
mod manifest;

use commands::Ctx;

/// Multi-label speech emotion benchmark toolkit.
#[derive(Debug, Parser)]
#[command(name = "emokit", version, propagate_version = true)]
struct Cli {
    /// Seed for every stochastic step
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Run manifest path [default: <main output>.manifest.json]
    #[arg(long, global = true, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// More log output (repeat for more)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn per-rater votes into labels (MR, PR or AR)
    Aggregate(commands::aggregate::Args),
    /// Build a speaker-independent fold plan and check it for leakage
    Partition(commands::partition::Args),
    /// Score a prediction file with threshold macro-F1
    Evaluate(commands::evaluate::Args),
    /// Adjust label distributions from typed descriptions with a chat model
    Relabel(commands::relabel::Args),
    /// Train the layer-weighted head with class-balanced cross-entropy
    Train(commands::train::Args),
    /// Run the leaderboard HTTP service
    Serve(commands::serve::Args),
    /// Average layer weights over checkpoints, or export radar data
    Report(commands::report::Args),
    /// Write synthetic layer-stacked features and labels
    Synth(commands::synth::Args),
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    use emokit::{aggregation::AggregationError, corpus::CorpusError, partitioning::PartitionError};
    use emokit::{relabel::RelabelError, scoring::ScoringError, trainer::TrainError};
    for cause in err.chain() {
        let kind = if cause.is::<CorpusError>() {
            "corpus"
        } else if cause.is::<AggregationError>() {
            "aggregation"
        } else if cause.is::<PartitionError>() {
            "partition"
        } else if cause.is::<ScoringError>() {
            "scoring"
        } else if cause.is::<RelabelError>() {
            "relabel"
        } else if cause.is::<TrainError>() {
            "train"
        } else if cause.is::<emokit_leaderboard::LeaderboardError>() {
            "leaderboard"
        } else if cause.is::<std::io::Error>() {
            "io"
        } else {
            continue;
        };
        return kind;
    }
    "error"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let ctx = Ctx {
        seed: cli.seed,
        manifest: cli.manifest,
    };
    let result = match cli.command {
        Command::Aggregate(a) => commands::aggregate::run(&ctx, a),
        Command::Partition(a) => commands::partition::run(&ctx, a),
        Command::Evaluate(a) => commands::evaluate::run(&ctx, a),
        Command::Relabel(a) => commands::relabel::run(&ctx, a),
        Command::Train(a) => commands::train::run(&ctx, a),
        Command::Serve(a) => commands::serve::run(&ctx, a),
        Command::Report(a) => commands::report::run(&ctx, a),
        Command::Synth(a) => commands::synth::run(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let body = json!({
                "error": {
                    "kind": error_kind(&err),
                    "message": format!("{err:#}"),
                    "chain": err.chain().map(|c| c.to_string()).collect::<Vec<_>>(),
                }
            });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
