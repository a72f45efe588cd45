//! Scores a prediction file against gold labels.
//!
//! This is the one code path behind both offline evaluation and leaderboard
//! submissions, so the two always agree bit for bit.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::aggregation::LabelRecord;
use crate::corpus::{EmotionTaxonomy, PredictionRecord};
use crate::evaluation::{binarize, combine_folds, ConfusionCounts, EvalResult, FoldCombine, MultiHot};
use crate::partitioning::PartitionPlan;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScoringError {
    #[error("missing predictions for {} utterance(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("predictions for {} utterance(s) outside the evaluated set: {}", .0.len(), .0.join(", "))]
    UnexpectedPredictions(Vec<String>),
    #[error("no gold label for {} utterance(s): {}", .0.len(), .0.join(", "))]
    MissingGold(Vec<String>),
    #[error("utterance {utterance_id:?}: expected {expected} values, got {got}")]
    WrongDimension {
        utterance_id: String,
        expected: usize,
        got: usize,
    },
    #[error("utterance {0:?}: multi-hot predictions must contain only 0 and 1")]
    NotMultiHot(String),
    #[error("utterance {0:?}: gold label names a class outside the taxonomy")]
    BadGold(String),
    #[error("fold {0} does not exist in the partition plan")]
    UnknownFold(usize),
    #[error("a fold was requested but no partition plan was given")]
    FoldWithoutPlan,
    #[error("partition plan has no folds")]
    NoFolds,
}

/// Whether prediction vectors are distributions (binarized here) or already
/// 0/1 vectors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionFormat {
    #[default]
    Distribution,
    MultiHot,
}

impl std::str::FromStr for PredictionFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "distribution" => Ok(PredictionFormat::Distribution),
            "multi_hot" | "multihot" | "multi-hot" => Ok(PredictionFormat::MultiHot),
            other => Err(format!("unknown prediction format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub result: EvalResult,
    pub counts: ConfusionCounts,
}

/// Ids that will be scored: the subset (or every gold record) minus samples
/// whose gold label was dropped.
pub fn evaluated_ids<'a>(
    golds: &'a [LabelRecord],
    subset: Option<&'a [String]>,
) -> Result<Vec<&'a str>, ScoringError> {
    let by_id: HashMap<&str, &LabelRecord> =
        golds.iter().map(|g| (g.utterance_id.as_str(), g)).collect();
    match subset {
        None => Ok(golds
            .iter()
            .filter(|g| !g.is_dropped())
            .map(|g| g.utterance_id.as_str())
            .collect()),
        Some(ids) => {
            let missing: Vec<String> = ids
                .iter()
                .filter(|id| !by_id.contains_key(id.as_str()))
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(ScoringError::MissingGold(missing));
            }
            Ok(ids
                .iter()
                .map(String::as_str)
                .filter(|id| !by_id[id].is_dropped())
                .collect())
        }
    }
}

/// Predictions must cover the evaluated set exactly. Predictions for subset
/// members whose gold was dropped are ignored.
pub fn score_predictions(
    taxonomy: &EmotionTaxonomy,
    golds: &[LabelRecord],
    predictions: &[PredictionRecord],
    subset: Option<&[String]>,
    format: PredictionFormat,
) -> Result<Scored, ScoringError> {
    let ids = evaluated_ids(golds, subset)?;
    let gold_by_id: HashMap<&str, &LabelRecord> =
        golds.iter().map(|g| (g.utterance_id.as_str(), g)).collect();
    let pred_by_id: HashMap<&str, &PredictionRecord> = predictions
        .iter()
        .map(|p| (p.utterance_id.as_str(), p))
        .collect();

    let tolerated: HashSet<&str> = match subset {
        Some(s) => s.iter().map(String::as_str).collect(),
        None => golds.iter().map(|g| g.utterance_id.as_str()).collect(),
    };
    let unexpected: Vec<String> = predictions
        .iter()
        .map(|p| p.utterance_id.as_str())
        .filter(|id| !tolerated.contains(id))
        .map(String::from)
        .collect();
    if !unexpected.is_empty() {
        return Err(ScoringError::UnexpectedPredictions(unexpected));
    }
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| !pred_by_id.contains_key(*id))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ScoringError::MissingPredictions(missing));
    }

    let c = taxonomy.len();
    let mut counts = ConfusionCounts::empty(c);
    for id in &ids {
        let pred = pred_by_id[id];
        if pred.distribution.len() != c {
            return Err(ScoringError::WrongDimension {
                utterance_id: id.to_string(),
                expected: c,
                got: pred.distribution.len(),
            });
        }
        let pred_bits = match format {
            PredictionFormat::Distribution => binarize(&pred.distribution),
            PredictionFormat::MultiHot => {
                if pred.distribution.iter().any(|&v| v != 0.0 && v != 1.0) {
                    return Err(ScoringError::NotMultiHot(id.to_string()));
                }
                MultiHot::new(pred.distribution.iter().map(|&v| v == 1.0).collect())
            }
        };
        let gold = gold_by_id[id]
            .target(taxonomy)
            .filter(|t| t.len() == c)
            .ok_or_else(|| ScoringError::BadGold(id.to_string()))?;
        counts.add(&pred_bits, &binarize(&gold));
    }
    Ok(Scored {
        result: EvalResult::from(&counts),
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScored {
    pub result: EvalResult,
    /// One entry per scored fold, in fold order.
    pub per_fold: Vec<EvalResult>,
}

/// Scores each fold's test ids separately and combines them. The prediction
/// file must cover the union of the folds' (non-dropped) test ids.
pub fn score_folds(
    taxonomy: &EmotionTaxonomy,
    golds: &[LabelRecord],
    predictions: &[PredictionRecord],
    folds: &[&[String]],
    format: PredictionFormat,
    combine: FoldCombine,
) -> Result<FoldScored, ScoringError> {
    if folds.is_empty() {
        return Err(ScoringError::NoFolds);
    }
    let mut union: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for id in folds.iter().flat_map(|f| f.iter()) {
        if seen.insert(id.as_str()) {
            union.push(id.clone());
        }
    }
    score_predictions(taxonomy, golds, predictions, Some(&union), format)?;
    let mut counts = Vec::with_capacity(folds.len());
    for fold in folds {
        let members: HashSet<&str> = fold.iter().map(String::as_str).collect();
        let in_fold: Vec<PredictionRecord> = predictions
            .iter()
            .filter(|p| members.contains(p.utterance_id.as_str()))
            .cloned()
            .collect();
        counts.push(score_predictions(taxonomy, golds, &in_fold, Some(fold), format)?.counts);
    }
    let result = combine_folds(&counts, combine).map_err(|_| ScoringError::NoFolds)?;
    Ok(FoldScored {
        result,
        per_fold: counts.iter().map(EvalResult::from).collect(),
    })
}

/// Scoring scope used by both the CLI and the leaderboard:
/// no plan scores every gold label; a plan with a fold scores that fold's
/// test split; a plan without a fold scores every fold's test split and
/// combines them.
pub fn score_with_plan(
    taxonomy: &EmotionTaxonomy,
    golds: &[LabelRecord],
    predictions: &[PredictionRecord],
    plan: Option<&PartitionPlan>,
    fold: Option<usize>,
    format: PredictionFormat,
    combine: FoldCombine,
) -> Result<FoldScored, ScoringError> {
    match (plan, fold) {
        (None, Some(_)) => Err(ScoringError::FoldWithoutPlan),
        (None, None) => {
            let s = score_predictions(taxonomy, golds, predictions, None, format)?;
            Ok(FoldScored {
                per_fold: vec![s.result.clone()],
                result: s.result,
            })
        }
        (Some(plan), Some(k)) => {
            let f = plan.fold(k).ok_or(ScoringError::UnknownFold(k))?;
            score_folds(taxonomy, golds, predictions, &[&f.test], format, combine)
        }
        (Some(plan), None) => {
            let folds: Vec<&[String]> = plan.folds.iter().map(|f| f.test.as_slice()).collect();
            score_folds(taxonomy, golds, predictions, &folds, format, combine)
        }
    }
}
