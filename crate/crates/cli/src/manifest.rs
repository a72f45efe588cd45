//! Run manifests: what a command read, what it wrote, and with which
//! settings. No timestamps, so identical runs give identical manifests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// sha256 of a file, or of a directory's sorted `name\0digest\n` listing.
pub fn digest(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        let mut h = Sha256::new();
        for entry in entries {
            let name = entry.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            h.update(name.as_bytes());
            h.update(b"\0");
            h.update(digest(&entry)?.as_bytes());
            h.update(b"\n");
        }
        Ok(hex::encode(h.finalize()))
    } else {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(hex::encode(Sha256::digest(bytes)))
    }
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(RunManifest {
            tool: "emokit",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            seed,
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: digest(path)?,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: digest(path)?,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        fs::write(path, bytes).with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `--manifest` if given, else `<output>.manifest.json`.
pub fn manifest_path(explicit: Option<&Path>, primary_output: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| {
        primary_output.map(|p| {
            let mut name = p.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(".manifest.json");
            p.with_file_name(name)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_next_to_output() {
        assert_eq!(
            manifest_path(None, Some(Path::new("out/labels.jsonl"))),
            Some(PathBuf::from("out/labels.jsonl.manifest.json"))
        );
        assert_eq!(manifest_path(Some(Path::new("m.json")), Some(Path::new("x"))), Some(PathBuf::from("m.json")));
        assert_eq!(manifest_path(None, None), None);
    }

    #[test]
    fn directory_digest_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b"), "2").unwrap();
        fs::write(dir.path().join("a"), "1").unwrap();
        let d1 = digest(dir.path()).unwrap();
        assert_eq!(d1, digest(dir.path()).unwrap());
        fs::write(dir.path().join("a"), "3").unwrap();
        assert_ne!(d1, digest(dir.path()).unwrap());
    }
}
