use std::path::PathBuf;

use anyhow::{bail, Result};
use serde::Serialize;

use emokit::corpus::load_annotations;
use emokit::partitioning::{assign, check_leakage, PartitionScheme};

use super::{load_taxonomy, write_json_file, Ctx};
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Built-in scheme (iemocap-5fold, improv-6fold, cremad-5fold, nnime-5fold) or a scheme / split JSON file
    #[arg(long)]
    pub scheme: String,
    /// Annotation JSONL
    #[arg(long)]
    pub input: PathBuf,
    /// Built-in taxonomy name or taxonomy JSON file
    #[arg(long, default_value = "pod-primary")]
    pub taxonomy: String,
    /// Plan JSON to write
    #[arg(long)]
    pub output: PathBuf,
}

pub fn run(ctx: &Ctx, args: Args) -> Result<()> {
    let taxonomy = load_taxonomy(&args.taxonomy)?;
    let corpus = load_annotations(&args.input, &taxonomy)?;
    let scheme = PartitionScheme::resolve(&args.scheme)?;
    let plan = assign(&scheme, &corpus)?;
    let leakage = check_leakage(&plan, &corpus);
    if !leakage.is_clean() {
        let lines: Vec<String> = leakage.violations.iter().map(|v| v.to_string()).collect();
        bail!("plan leaks speakers across splits:\n{}", lines.join("\n"));
    }
    write_json_file(&args.output, &plan)?;
    println!("{}: {} folds", plan.scheme, plan.folds.len());
    for (i, f) in plan.folds.iter().enumerate() {
        println!("fold {}: train {}, dev {}, test {}", i + 1, f.train.len(), f.dev.len(), f.test.len());
    }

    let mut manifest = RunManifest::new("partition", ctx.seed, &args)?;
    manifest.input(&args.input)?;
    manifest.output(&args.output)?;
    ctx.finish(&manifest, Some(&args.output))
}
