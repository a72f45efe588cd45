use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use emokit::trainer::synthetic::{generate, SyntheticConfig};
use emokit::trainer::write_feature_file;

use super::{write_json_file, write_jsonl_file, Ctx};
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Output directory; gets features/, labels.jsonl and taxonomy.json
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 8)]
    pub frames: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 100)]
    pub per_class: usize,
    /// Scale of the class centroids
    #[arg(long, default_value_t = 1.0)]
    pub separation: f64,
    /// Per-frame noise standard deviation
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
}

pub fn run(ctx: &Ctx, args: Args) -> Result<()> {
    let cfg = SyntheticConfig {
        classes: args.classes,
        layers: args.layers,
        frames: args.frames,
        dim: args.dim,
        per_class: args.per_class,
        separation: args.separation,
        noise: args.noise,
        seed: ctx.seed,
    };
    let data = generate(&cfg)?;
    let features = args.out.join("features");
    std::fs::create_dir_all(&features).with_context(|| format!("creating {}", features.display()))?;
    for (stack, _) in &data.samples {
        write_feature_file(&features, stack)?;
    }
    let labels: Vec<_> = data.samples.iter().map(|(_, l)| l.clone()).collect();
    let labels_path = args.out.join("labels.jsonl");
    write_jsonl_file(&labels_path, &labels)?;
    let taxonomy_path = args.out.join("taxonomy.json");
    write_json_file(&taxonomy_path, &data.taxonomy)?;
    println!("{} samples in {}", data.samples.len(), args.out.display());

    let mut manifest = RunManifest::new("synth", ctx.seed, &args)?;
    manifest.output(&features)?;
    manifest.output(&labels_path)?;
    manifest.output(&taxonomy_path)?;
    ctx.finish(&manifest, Some(&labels_path))
}
