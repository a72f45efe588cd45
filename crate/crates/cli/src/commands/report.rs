use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use emokit::trainer::{layer_weight_report, Checkpoint};
use emokit_leaderboard::{system_clock, Leaderboard, RadarPayload};

use super::{write_json_file, Ctx};
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Directory of checkpoint JSON files; averages their layer weights
    #[arg(long, value_name = "DIR", required_unless_present = "data_dir")]
    pub checkpoints: Option<PathBuf>,
    /// Leaderboard data directory; exports the radar matrix for --models
    #[arg(long, requires = "models")]
    pub data_dir: Option<PathBuf>,
    /// Model names to compare
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// JSON file to write
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct LayerReport {
    pub checkpoints: Vec<String>,
    pub mean_weights: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ReportOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<LayerReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radar: Option<RadarPayload>,
}

fn checkpoint_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") && !path.to_string_lossy().ends_with(".manifest.json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn run(ctx: &Ctx, args: Args) -> Result<()> {
    let mut manifest = RunManifest::new("report", ctx.seed, &args)?;
    let mut output = ReportOutput { layers: None, radar: None };

    if let Some(dir) = &args.checkpoints {
        let files = checkpoint_files(dir)?;
        if files.is_empty() {
            bail!("no checkpoint files in {}", dir.display());
        }
        let mut params = Vec::with_capacity(files.len());
        for f in &files {
            let ck = Checkpoint::load(f).with_context(|| format!("loading {}", f.display()))?;
            params.push(ck.params()?);
        }
        let mean_weights = layer_weight_report(&params)?;
        println!("{:>5}  {:>8}", "layer", "weight");
        for (i, w) in mean_weights.iter().enumerate() {
            println!("{i:>5}  {w:>8.4}");
        }
        manifest.input(dir)?;
        output.layers = Some(LayerReport {
            checkpoints: files.iter().map(|f| f.display().to_string()).collect(),
            mean_weights,
        });
    }

    if let Some(dir) = &args.data_dir {
        let board = Leaderboard::open(dir, system_clock())?;
        let radar = board.compare(&args.models)?;
        for (model, row) in radar.models.iter().zip(&radar.matrix) {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map_or("-".to_string(), |v| format!("{v:.4}")))
                .collect();
            println!("{model}: {}", cells.join(" "));
        }
        println!("conditions: {}", radar.conditions.join(" "));
        manifest.input(&dir.join(emokit_leaderboard::store::LOG_FILE))?;
        output.radar = Some(radar);
    }

    if let Some(out) = &args.out {
        write_json_file(out, &output)?;
        manifest.output(out)?;
    }
    ctx.finish(&manifest, args.out.as_deref())
}
