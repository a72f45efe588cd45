//! Gold labels the server scores against.
//!
//! Layout: `<data-dir>/datasets/<dataset>/<condition>/` holding
//! `taxonomy.json`, `labels.jsonl` and optionally `plan.json`.

use std::collections::BTreeMap;
use std::path::Path;

use emokit::aggregation::LabelRecord;
use emokit::corpus::{load_labels, EmotionTaxonomy};
use emokit::partitioning::PartitionPlan;

use crate::LeaderboardError;

#[derive(Debug, Clone)]
pub struct Condition {
    pub taxonomy: EmotionTaxonomy,
    pub golds: Vec<LabelRecord>,
    pub plan: Option<PartitionPlan>,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    datasets: BTreeMap<String, BTreeMap<String, Condition>>,
}

fn sorted_dirs(path: &Path) -> Result<Vec<(String, std::path::PathBuf)>, LeaderboardError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(path)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            out.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

impl Registry {
    pub fn load(data_dir: &Path) -> Result<Self, LeaderboardError> {
        let root = data_dir.join("datasets");
        let mut reg = Registry::default();
        if !root.is_dir() {
            return Ok(reg);
        }
        for (dataset, dpath) in sorted_dirs(&root)? {
            for (condition, cpath) in sorted_dirs(&dpath)? {
                let setup = |e: String| LeaderboardError::Setup(format!("{}: {e}", cpath.display()));
                let taxonomy = EmotionTaxonomy::from_json_file(&cpath.join("taxonomy.json")).map_err(|e| setup(e.to_string()))?;
                let golds = load_labels(&cpath.join("labels.jsonl"), &taxonomy).map_err(|e| setup(e.to_string()))?;
                let plan_path = cpath.join("plan.json");
                let plan = if plan_path.exists() {
                    Some(PartitionPlan::from_json_file(&plan_path).map_err(|e| setup(e.to_string()))?)
                } else {
                    None
                };
                reg.insert(&dataset, &condition, Condition { taxonomy, golds, plan });
            }
        }
        Ok(reg)
    }

    pub fn insert(&mut self, dataset: &str, condition: &str, c: Condition) {
        self.datasets
            .entry(dataset.to_string())
            .or_default()
            .insert(condition.to_string(), c);
    }

    pub fn has_dataset(&self, dataset: &str) -> bool {
        self.datasets.contains_key(dataset)
    }

    pub fn get(&self, dataset: &str, condition: &str) -> Result<&Condition, LeaderboardError> {
        let conds = self
            .datasets
            .get(dataset)
            .ok_or_else(|| LeaderboardError::UnknownDataset(dataset.to_string()))?;
        conds.get(condition).ok_or_else(|| LeaderboardError::UnknownCondition {
            dataset: dataset.to_string(),
            condition: condition.to_string(),
        })
    }

    pub fn datasets(&self) -> impl Iterator<Item = (&str, Vec<&str>)> {
        self.datasets
            .iter()
            .map(|(d, c)| (d.as_str(), c.keys().map(String::as_str).collect()))
    }
}
