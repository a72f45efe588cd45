use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use emokit::aggregation::{smooth, SmoothingConfig};
use emokit::corpus::{load_annotations, load_labels};
use emokit::relabel::{
    collect_items, estimate_cost, merge, run_pipeline, ChatTransport, ClientConfig, FixtureTransport, HttpTransport, ItemOutcome,
    PipelineConfig, RelabelState, MAX_BATCH,
};

use super::{load_taxonomy, write_json_file, write_jsonl_file, Ctx};
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Annotation JSONL with typed descriptions
    #[arg(long)]
    pub input: PathBuf,
    /// Aggregated label JSONL to adjust
    #[arg(long)]
    pub labels: PathBuf,
    /// Built-in taxonomy name or taxonomy JSON file
    #[arg(long, default_value = "pod-primary")]
    pub taxonomy: String,
    /// Items per request (at most 30)
    #[arg(long, default_value_t = MAX_BATCH)]
    pub batch_size: usize,
    /// Answer requests from recorded fixtures in this directory instead of the API
    #[arg(long, value_name = "DIR")]
    pub mock: Option<PathBuf>,
    /// Merged label JSONL to write
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-utterance relabel rows (reference, adjusted, reason, modified)
    #[arg(long)]
    pub artifact: Option<PathBuf>,
    /// Resume file; answered items are skipped on rerun
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Batches sent concurrently
    #[arg(long, default_value_t = 4)]
    pub in_flight: usize,
    /// Extra attempts for unanswered items
    #[arg(long, default_value_t = 3)]
    pub max_retries: usize,
    #[arg(long, default_value = "gpt-4-0125-preview")]
    pub model: String,
    #[arg(long, default_value = "https://api.openai.com/v1")]
    pub base_url: String,
    /// Smooth adjusted distributions with this epsilon before merging
    #[arg(long, value_name = "EPSILON")]
    pub resmooth: Option<f64>,
    /// Print the item count and cost estimate, then stop
    #[arg(long)]
    pub dry_run: bool,
}

pub fn run(ctx: &Ctx, args: Args) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let corpus = load_annotations(&args.input, &taxonomy)?;
    let labels = load_labels(&args.labels, &taxonomy)?;
    let items = collect_items(&corpus, &labels, &taxonomy)?;

    let client = ClientConfig {
        model: args.model.clone(),
        seed: ctx.seed,
        batch_size: args.batch_size,
        base_url: args.base_url.clone(),
        ..ClientConfig::default()
    };
    client.validate()?;
    println!(
        "{} items with typed descriptions, {} requests, estimated cost ${:.2}",
        items.len(),
        items.len().div_ceil(client.batch_size),
        estimate_cost(items.len(), &client)
    );
    if args.dry_run {
        return Ok(());
    }

    let transport: Box<dyn ChatTransport> = match &args.mock {
        Some(dir) => Box::new(FixtureTransport::from_dir(dir)?),
        None => Box::new(HttpTransport::from_env(&client)?),
    };
    let mut state = match &args.state {
        Some(p) => RelabelState::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => RelabelState::default(),
    };
    let cfg = PipelineConfig {
        client,
        max_retries: args.max_retries,
        in_flight: args.in_flight,
    };
    let pipeline = run_pipeline(&items, transport.as_ref(), &cfg, &mut state);
    // Keep whatever was answered even if the run failed part way.
    if let Some(p) = &args.state {
        state.save(p).with_context(|| format!("writing {}", p.display()))?;
    }
    let report = pipeline?;
    for (item, outcome) in items.iter().zip(&report.outcomes) {
        if let ItemOutcome::Fallback(why) = outcome {
            log::warn!("{}: kept reference ({why})", item.utterance_id);
        }
    }

    let mut results = report.results.clone();
    if let Some(eps) = args.resmooth {
        let cfg = SmoothingConfig::new(eps)?;
        for r in results.iter_mut().filter(|r| r.modified) {
            r.adjusted = smooth(&r.adjusted, cfg);
        }
    }
    let (merged, stats) = merge(&results, &labels)?;
    println!(
        "{} requests, {} fallbacks, {} of {} modified ({:.1}%)",
        report.requests,
        report.fallbacks(),
        stats.modified,
        stats.relabeled,
        100.0 * stats.modified_fraction
    );

    let mut manifest = RunManifest::new("relabel", ctx.seed, &args)?;
    manifest.input(&args.input)?;
    manifest.input(&args.labels)?;
    if let Some(dir) = &args.mock {
        manifest.input(dir)?;
    }
    if let Some(out) = &args.output {
        write_jsonl_file(out, &merged)?;
        manifest.output(out)?;
    }
    if let Some(a) = &args.artifact {
        write_jsonl_file(a, &results)?;
        manifest.output(a)?;
    }
    if let Some(p) = &args.state {
        manifest.output(p)?;
    }
    let stats_path = args.output.as_ref().map(|o| o.with_extension("stats.json"));
    if let Some(p) = &stats_path {
        write_json_file(p, &stats)?;
        manifest.output(p)?;
    }
    ctx.finish(&manifest, args.output.as_deref().or(args.artifact.as_deref()))
}
