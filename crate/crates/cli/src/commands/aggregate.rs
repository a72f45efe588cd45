use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use emokit::aggregation::{aggregate_corpus, data_loss_report, AggregateOptions, Rule, SmoothingConfig};
use emokit::corpus::load_annotations;

use super::{load_taxonomy, write_json_file, write_jsonl_file, Ctx};
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Aggregation rule: mr, pr or ar
    #[arg(long)]
    pub rule: Rule,
    /// Built-in taxonomy name or taxonomy JSON file
    #[arg(long, default_value = "pod-primary")]
    pub taxonomy: String,
    /// Label smoothing epsilon applied to distributions
    #[arg(long, default_value_t = 0.05)]
    pub smoothing: f64,
    /// Also smooth single-class labels (written as distributions)
    #[arg(long)]
    pub smooth_single: bool,
    /// Annotation JSONL
    #[arg(long)]
    pub input: PathBuf,
    /// Label JSONL to write
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the data-loss report as JSON
    #[arg(long, value_name = "PATH")]
    pub loss_report: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, args: Args) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let corpus = load_annotations(&args.input, &taxonomy).with_context(|| format!("loading {}", args.input.display()))?;
    let opts = AggregateOptions {
        rule: args.rule,
        smoothing: SmoothingConfig::new(args.smoothing)?,
        smooth_single: args.smooth_single,
    };
    let labels = aggregate_corpus(&corpus, &taxonomy, &opts)?;
    write_jsonl_file(&args.output, &labels)?;

    let report = data_loss_report(&corpus, &taxonomy)?;
    println!(
        "{} utterances, {} scorable, {} awaiting relabel",
        corpus.len(),
        report.scorable,
        report.awaiting_relabel
    );
    println!("{:<4}  {:>8}  {:>8}", "rule", "dropped", "loss %");
    for r in &report.rules {
        println!("{:<4}  {:>8}  {:>8.2}", r.rule.to_string(), r.dropped, 100.0 * r.ratio);
    }

    let mut manifest = RunManifest::new("aggregate", ctx.seed, &args)?;
    manifest.input(&args.input)?;
    manifest.output(&args.output)?;
    if let Some(path) = &args.loss_report {
        write_json_file(path, &report)?;
        manifest.output(path)?;
    }
    ctx.finish(&manifest, Some(&args.output))
}
