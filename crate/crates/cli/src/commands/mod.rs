use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use emokit::corpus::{write_jsonl, EmotionTaxonomy};

use crate::manifest::{manifest_path, RunManifest};

pub mod aggregate;
pub mod evaluate;
pub mod partition;
pub mod relabel;
pub mod report;
pub mod serve;
pub mod synth;
pub mod train;

pub struct Ctx {
    pub seed: u64,
    pub manifest: Option<PathBuf>,
}

impl Ctx {
    /// Writes the manifest next to `primary` unless `--manifest` says
    /// otherwise. Runs without any output file and no `--manifest` skip it.
    pub fn finish(&self, manifest: &RunManifest, primary: Option<&Path>) -> Result<()> {
        if let Some(path) = manifest_path(self.manifest.as_deref(), primary) {
            manifest.write(&path)?;
        }
        Ok(())
    }
}

/// A built-in taxonomy name or a taxonomy JSON file.
pub fn load_taxonomy(spec: &str) -> Result<EmotionTaxonomy> {
    match EmotionTaxonomy::builtin(spec) {
        Some(t) => Ok(t),
        None => EmotionTaxonomy::from_json_file(Path::new(spec)).with_context(|| format!("taxonomy {spec:?}")),
    }
}

pub fn write_jsonl_file<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_jsonl(BufWriter::new(file), records).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
