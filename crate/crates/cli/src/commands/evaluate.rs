use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use emokit::corpus::{load_labels, load_predictions};
use emokit::evaluation::{EvalReport, FoldCombine};
use emokit::partitioning::PartitionPlan;
use emokit::scoring::{score_with_plan, FoldScored, PredictionFormat};

use super::{load_taxonomy, write_json_file, Ctx};
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Prediction JSONL
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold label JSONL
    #[arg(long)]
    pub gold: PathBuf,
    /// Built-in taxonomy name or taxonomy JSON file
    #[arg(long, default_value = "pod-primary")]
    pub taxonomy: String,
    /// Fold plan; without --fold every fold's test split is scored
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// 1-based fold whose test split is scored
    #[arg(long, requires = "plan")]
    pub fold: Option<usize>,
    /// Prediction vectors: distribution (binarized at 1/C) or multi_hot
    #[arg(long, default_value = "distribution")]
    pub format: PredictionFormat,
    /// Fold combination: mean of per-fold scores or pooled counts
    #[arg(long, default_value = "mean")]
    pub combine: FoldCombine,
    /// Dataset name shown in the report
    #[arg(long, default_value = "dataset")]
    pub dataset: String,
    /// Write the full result as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// JSON written by `--out`.
#[derive(Debug, Serialize)]
pub struct EvaluateOutput {
    pub report: EvalReport,
    pub per_fold: Vec<EvalReport>,
    pub score: FoldScored,
}

pub fn run(ctx: &Ctx, args: Args) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let golds = load_labels(&args.gold, &taxonomy).with_context(|| format!("loading {}", args.gold.display()))?;
    let preds = load_predictions(&args.pred, &taxonomy).with_context(|| format!("loading {}", args.pred.display()))?;
    let plan = match &args.plan {
        Some(p) => Some(PartitionPlan::from_json_file(p)?),
        None => None,
    };
    let score = score_with_plan(&taxonomy, &golds, &preds, plan.as_ref(), args.fold, args.format, args.combine)?;
    let report = EvalReport::new(&args.dataset, args.fold, &taxonomy, &score.result);
    let per_fold: Vec<EvalReport> = match (args.fold, score.per_fold.len()) {
        (None, n) if n > 1 => score
            .per_fold
            .iter()
            .enumerate()
            .map(|(i, r)| EvalReport::new(&args.dataset, Some(i + 1), &taxonomy, r))
            .collect(),
        _ => Vec::new(),
    };
    for f in &per_fold {
        println!("fold {}: macro-F1 {:.4} over {} samples", f.fold.unwrap_or(0), f.macro_f1, f.n_samples);
    }
    print!("{}", report.table());

    let mut manifest = RunManifest::new("evaluate", ctx.seed, &args)?;
    manifest.input(&args.pred)?;
    manifest.input(&args.gold)?;
    if let Some(p) = &args.plan {
        manifest.input(p)?;
    }
    if let Some(out) = &args.out {
        write_json_file(out, &EvaluateOutput { report, per_fold, score })?;
        manifest.output(out)?;
    }
    ctx.finish(&manifest, args.out.as_deref())
}
