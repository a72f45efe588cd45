//! Rankings and radar data, computed from the submission log alone.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::Submission;

/// Leaderboard column for a submission: the condition, suffixed with the
/// fold for single-fold submissions.
pub fn column_key(condition: &str, fold: Option<usize>) -> String {
    match fold {
        None => condition.to_string(),
        Some(k) => format!("{condition}/fold{k}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub model_name: String,
    /// Macro-F1 per column.
    pub scores: BTreeMap<String, f64>,
    /// Mean of the populated columns.
    pub average: f64,
    pub submission_ids: BTreeMap<String, String>,
    /// When the score this row is ranked by was submitted.
    pub submitted_at: DateTime<Utc>,
}

type CellKey = (String, String, String);

/// Best submission per (model, dataset, column). Ties go to the earlier one.
fn best<'a>(subs: impl Iterator<Item = &'a Submission>) -> BTreeMap<CellKey, &'a Submission> {
    let mut out: BTreeMap<CellKey, &Submission> = BTreeMap::new();
    for s in subs {
        let key = (s.model_name.clone(), s.dataset.clone(), column_key(&s.condition, s.fold));
        match out.get(&key) {
            Some(cur)
                if cur.score.result.macro_f1 > s.score.result.macro_f1
                    || (cur.score.result.macro_f1 == s.score.result.macro_f1 && cur.created_at <= s.created_at) => {}
            _ => {
                out.insert(key, s);
            }
        }
    }
    out
}

/// Rows for `dataset`, best first. With a column, only models that have it
/// are ranked, by that column; otherwise by average. Ties go to the earlier
/// submission.
pub fn rankings(subs: &[Submission], dataset: &str, column: Option<&str>) -> Vec<LeaderboardRow> {
    let chosen = best(subs.iter().filter(|s| s.dataset == dataset));
    let mut per_model: BTreeMap<String, Vec<(String, &Submission)>> = BTreeMap::new();
    for ((model, _, col), s) in chosen {
        per_model.entry(model).or_default().push((col, s));
    }
    let mut rows: Vec<LeaderboardRow> = per_model
        .into_iter()
        .filter_map(|(model_name, entries)| {
            let scores: BTreeMap<String, f64> =
                entries.iter().map(|(c, s)| (c.clone(), s.score.result.macro_f1)).collect();
            let average = scores.values().sum::<f64>() / scores.len() as f64;
            let submitted_at = match column {
                Some(col) => entries.iter().find(|(c, _)| c == col)?.1.created_at,
                None => entries.iter().map(|(_, s)| s.created_at).max()?,
            };
            Some(LeaderboardRow {
                rank: 0,
                model_name,
                submission_ids: entries.iter().map(|(c, s)| (c.clone(), s.id.clone())).collect(),
                scores,
                average,
                submitted_at,
            })
        })
        .collect();
    let key = |r: &LeaderboardRow| match column {
        Some(col) => r.scores[col],
        None => r.average,
    };
    rows.sort_by(|a, b| {
        key(b)
            .partial_cmp(&key(a))
            .unwrap_or(Ordering::Equal)
            .then(a.submitted_at.cmp(&b.submitted_at))
            .then(a.model_name.cmp(&b.model_name))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    rows
}

/// Model x condition matrix of macro-F1 for radar plots. Conditions are
/// `dataset/column`; missing cells are null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarPayload {
    pub models: Vec<String>,
    pub conditions: Vec<String>,
    pub matrix: Vec<Vec<Option<f64>>>,
}

/// Fails with the names that have no submissions.
pub fn compare(subs: &[Submission], models: &[String]) -> Result<RadarPayload, Vec<String>> {
    let unknown: Vec<String> = models
        .iter()
        .filter(|m| !subs.iter().any(|s| &s.model_name == *m))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(unknown);
    }
    let scores: BTreeMap<(String, String), f64> = best(subs.iter().filter(|s| models.contains(&s.model_name)))
        .into_iter()
        .map(|((m, d, c), s)| ((m, format!("{d}/{c}")), s.score.result.macro_f1))
        .collect();
    let conditions: Vec<String> = scores.keys().map(|(_, c)| c.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let matrix = models
        .iter()
        .map(|m| conditions.iter().map(|c| scores.get(&(m.clone(), c.clone())).copied()).collect())
        .collect();
    Ok(RadarPayload {
        models: models.to_vec(),
        conditions,
        matrix,
    })
}
