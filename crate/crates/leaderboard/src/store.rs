//! Append-only submission log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::{LeaderboardError, Submission};

#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    file: File,
}

pub const LOG_FILE: &str = "submissions.jsonl";

impl Store {
    /// Opens (creating if needed) the log and replays it.
    pub fn open(data_dir: &Path) -> Result<(Self, Vec<Submission>), LeaderboardError> {
        std::fs::create_dir_all(data_dir)?;
        let path = data_dir.join(LOG_FILE);
        let submissions = if path.exists() { replay(&path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((Store { path, file }, submissions))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, s: &Submission) -> Result<(), LeaderboardError> {
        let mut line = serde_json::to_vec(s)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub fn replay(path: &Path) -> Result<Vec<Submission>, LeaderboardError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: Submission = serde_json::from_str(&line)
            .map_err(|e| LeaderboardError::Setup(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(s);
    }
    Ok(out)
}
