//! Per-rater votes to training labels.
//!
//! Three rules are supported. The majority rule keeps a class only when more
//! than half of the raters chose it; the plurality rule keeps a unique
//! most-voted class; the all-inclusive rule keeps every utterance as a
//! normalized vote distribution. Votes are counted per label instance, so a
//! rater who ticks two boxes contributes two instances.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmotionTaxonomy, UtteranceAnnotations};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AggregationError {
    #[error("utterance {0:?} has only typed descriptions and needs relabeling before it can be scored")]
    NeedsRelabel(String),
    #[error("emotion {class:?} in utterance {utterance_id:?} is not in the taxonomy")]
    UnknownClass { utterance_id: String, class: String },
    #[error("smoothing epsilon must lie in [0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("unknown aggregation rule {0:?} (expected mr, pr or ar)")]
    UnknownRule(String),
    #[error("label record {utterance_id:?}: {message}")]
    InvalidRecord {
        utterance_id: String,
        message: String,
    },
}

/// Label-instance counts in taxonomy order, plus the number of raters who
/// picked at least one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteCounts {
    counts: Vec<u32>,
    total: u32,
    raters: u32,
}

impl VoteCounts {
    /// Counts from single-select votes: one rater per instance.
    pub fn from_counts(counts: Vec<u32>) -> Self {
        let total = counts.iter().sum();
        VoteCounts {
            counts,
            total,
            raters: total,
        }
    }

    pub fn with_raters(counts: Vec<u32>, raters: u32) -> Self {
        let total = counts.iter().sum();
        VoteCounts {
            counts,
            total,
            raters,
        }
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn get(&self, taxonomy: &EmotionTaxonomy, class: &str) -> Option<u32> {
        taxonomy.index_of(class).map(|i| self.counts[i])
    }
}

pub fn count_votes(
    utt: &UtteranceAnnotations,
    taxonomy: &EmotionTaxonomy,
) -> Result<VoteCounts, AggregationError> {
    let mut counts = vec![0u32; taxonomy.len()];
    let mut raters = 0;
    for vote in &utt.votes {
        if !vote.emotions.is_empty() {
            raters += 1;
        }
        for class in &vote.emotions {
            let idx = taxonomy
                .index_of(class)
                .ok_or_else(|| AggregationError::UnknownClass {
                    utterance_id: utt.utterance_id.clone(),
                    class: class.clone(),
                })?;
            counts[idx] += 1;
        }
    }
    let out = VoteCounts::with_raters(counts, raters);
    if out.total == 0 {
        return Err(AggregationError::NeedsRelabel(utt.utterance_id.clone()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Mr,
    Pr,
    Ar,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Mr, Rule::Pr, Rule::Ar];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::Mr => "mr",
            Rule::Pr => "pr",
            Rule::Ar => "ar",
        })
    }
}

impl std::str::FromStr for Rule {
    type Err = AggregationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mr" => Ok(Rule::Mr),
            "pr" => Ok(Rule::Pr),
            "ar" => Ok(Rule::Ar),
            _ => Err(AggregationError::UnknownRule(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoMajority,
    AmbiguousMajority,
    PluralityTie,
    /// Only typed descriptions, no class votes.
    AwaitingRelabel,
}

impl DropReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            DropReason::NoMajority => "no majority",
            DropReason::AmbiguousMajority => "ambiguous majority",
            DropReason::PluralityTie => "plurality tie",
            DropReason::AwaitingRelabel => "awaiting relabel",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            DropReason::NoMajority,
            DropReason::AmbiguousMajority,
            DropReason::PluralityTie,
            DropReason::AwaitingRelabel,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelKind {
    Single(String),
    Distribution(Vec<f64>),
    Dropped(DropReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LabelWire", into = "LabelWire")]
pub struct LabelRecord {
    pub utterance_id: String,
    pub kind: LabelKind,
    pub smoothed: bool,
}

impl LabelRecord {
    pub fn is_dropped(&self) -> bool {
        matches!(self.kind, LabelKind::Dropped(_))
    }

    /// Soft target in taxonomy order: one-hot for single labels, the stored
    /// vector for distributions, `None` for dropped samples.
    pub fn target(&self, taxonomy: &EmotionTaxonomy) -> Option<Vec<f64>> {
        match &self.kind {
            LabelKind::Single(class) => {
                let idx = taxonomy.index_of(class)?;
                let mut v = vec![0.0; taxonomy.len()];
                v[idx] = 1.0;
                Some(v)
            }
            LabelKind::Distribution(d) => Some(d.clone()),
            LabelKind::Dropped(_) => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LabelWire {
    utterance_id: String,
    kind: String,
    class: Option<String>,
    distribution: Option<Vec<f64>>,
    smoothed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

impl From<LabelRecord> for LabelWire {
    fn from(r: LabelRecord) -> Self {
        let (kind, class, distribution, reason) = match r.kind {
            LabelKind::Single(c) => ("single", Some(c), None, None),
            LabelKind::Distribution(d) => ("distribution", None, Some(d), None),
            LabelKind::Dropped(why) => ("dropped", None, None, Some(why.as_str().to_string())),
        };
        LabelWire {
            utterance_id: r.utterance_id,
            kind: kind.to_string(),
            class,
            distribution,
            smoothed: r.smoothed,
            reason,
        }
    }
}

impl TryFrom<LabelWire> for LabelRecord {
    type Error = AggregationError;

    fn try_from(w: LabelWire) -> Result<Self, Self::Error> {
        let invalid = |message: &str| AggregationError::InvalidRecord {
            utterance_id: w.utterance_id.clone(),
            message: message.to_string(),
        };
        let kind = match w.kind.as_str() {
            "single" => LabelKind::Single(w.class.clone().ok_or_else(|| invalid("single label without class"))?),
            "distribution" => {
                let d = w
                    .distribution
                    .clone()
                    .ok_or_else(|| invalid("distribution label without vector"))?;
                if d.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(invalid("distribution has a negative or non-finite entry"));
                }
                let sum: f64 = d.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(invalid(&format!("distribution sums to {sum}")));
                }
                LabelKind::Distribution(d)
            }
            "dropped" => LabelKind::Dropped(
                w.reason
                    .as_deref()
                    .and_then(DropReason::parse)
                    .unwrap_or(DropReason::NoMajority),
            ),
            other => return Err(invalid(&format!("unknown kind {other:?}"))),
        };
        Ok(LabelRecord {
            utterance_id: w.utterance_id,
            kind,
            smoothed: w.smoothed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingConfig {
    epsilon: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { epsilon: 0.05 }
    }
}

impl SmoothingConfig {
    pub fn new(epsilon: f64) -> Result<Self, AggregationError> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(AggregationError::InvalidEpsilon(epsilon));
        }
        Ok(SmoothingConfig { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

fn dropped(utt: &str, why: DropReason) -> LabelRecord {
    LabelRecord {
        utterance_id: utt.to_string(),
        kind: LabelKind::Dropped(why),
        smoothed: false,
    }
}

/// Majority rule: a class must be chosen by strictly more than half of the
/// voting raters. With single-select votes that is half of all instances.
/// Multi-select can push two classes past half; that sample is dropped as
/// ambiguous.
pub fn aggregate_mr(utterance_id: &str, counts: &VoteCounts, taxonomy: &EmotionTaxonomy) -> LabelRecord {
    let raters = counts.raters as u64;
    let winners: Vec<usize> = counts
        .counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| 2 * c as u64 > raters)
        .map(|(i, _)| i)
        .collect();
    match winners.as_slice() {
        [only] => LabelRecord {
            utterance_id: utterance_id.to_string(),
            kind: LabelKind::Single(taxonomy.classes()[*only].clone()),
            smoothed: false,
        },
        [] => dropped(utterance_id, DropReason::NoMajority),
        _ => dropped(utterance_id, DropReason::AmbiguousMajority),
    }
}

pub fn aggregate_pr(utterance_id: &str, counts: &VoteCounts, taxonomy: &EmotionTaxonomy) -> LabelRecord {
    let max = counts.counts.iter().copied().max().unwrap_or(0);
    let mut at_max = counts.counts.iter().enumerate().filter(|(_, &c)| c == max);
    match (at_max.next(), at_max.next()) {
        (Some((idx, _)), None) if max > 0 => LabelRecord {
            utterance_id: utterance_id.to_string(),
            kind: LabelKind::Single(taxonomy.classes()[idx].clone()),
            smoothed: false,
        },
        _ => dropped(utterance_id, DropReason::PluralityTie),
    }
}

pub fn aggregate_ar(utterance_id: &str, counts: &VoteCounts) -> LabelRecord {
    let total = counts.total as f64;
    LabelRecord {
        utterance_id: utterance_id.to_string(),
        kind: LabelKind::Distribution(counts.counts.iter().map(|&c| c as f64 / total).collect()),
        smoothed: false,
    }
}

/// Mixes a distribution with the uniform one: `(1 - eps) * p + eps / C`.
pub fn smooth(dist: &[f64], cfg: SmoothingConfig) -> Vec<f64> {
    let eps = cfg.epsilon;
    if eps == 0.0 {
        return dist.to_vec();
    }
    let floor = eps / dist.len() as f64;
    dist.iter().map(|p| (1.0 - eps) * p + floor).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateOptions {
    pub rule: Rule,
    pub smoothing: SmoothingConfig,
    /// Also smooth MR/PR one-hot targets. They are then emitted as
    /// distributions.
    pub smooth_single: bool,
}

impl AggregateOptions {
    pub fn new(rule: Rule) -> Self {
        AggregateOptions {
            rule,
            smoothing: SmoothingConfig::default(),
            smooth_single: false,
        }
    }
}

pub fn aggregate_utterance(
    utt: &UtteranceAnnotations,
    taxonomy: &EmotionTaxonomy,
    opts: &AggregateOptions,
) -> Result<LabelRecord, AggregationError> {
    let counts = match count_votes(utt, taxonomy) {
        Ok(c) => c,
        Err(AggregationError::NeedsRelabel(id)) => return Ok(dropped(&id, DropReason::AwaitingRelabel)),
        Err(e) => return Err(e),
    };
    let id = utt.utterance_id.as_str();
    let mut rec = match opts.rule {
        Rule::Mr => aggregate_mr(id, &counts, taxonomy),
        Rule::Pr => aggregate_pr(id, &counts, taxonomy),
        Rule::Ar => aggregate_ar(id, &counts),
    };
    if opts.smoothing.epsilon() > 0.0 {
        let target = match &rec.kind {
            LabelKind::Distribution(d) => Some(d.clone()),
            LabelKind::Single(_) if opts.smooth_single => rec.target(taxonomy),
            _ => None,
        };
        if let Some(t) = target {
            rec.kind = LabelKind::Distribution(smooth(&t, opts.smoothing));
            rec.smoothed = true;
        }
    }
    Ok(rec)
}

pub fn aggregate_corpus(
    corpus: &[UtteranceAnnotations],
    taxonomy: &EmotionTaxonomy,
    opts: &AggregateOptions,
) -> Result<Vec<LabelRecord>, AggregationError> {
    corpus
        .iter()
        .map(|u| aggregate_utterance(u, taxonomy, opts))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleLoss {
    pub rule: Rule,
    pub dropped: usize,
    pub ratio: f64,
}

/// Share of scorable utterances each rule throws away. Utterances with only
/// typed descriptions are counted separately and excluded from the ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataLossReport {
    pub scorable: usize,
    pub awaiting_relabel: usize,
    pub rules: Vec<RuleLoss>,
}

impl DataLossReport {
    pub fn ratio(&self, rule: Rule) -> f64 {
        self.rules
            .iter()
            .find(|r| r.rule == rule)
            .map(|r| r.ratio)
            .unwrap_or(0.0)
    }
}

pub fn data_loss_report(
    corpus: &[UtteranceAnnotations],
    taxonomy: &EmotionTaxonomy,
) -> Result<DataLossReport, AggregationError> {
    let mut scorable = 0usize;
    let mut awaiting = 0usize;
    let mut dropped = [0usize; 3];
    for utt in corpus {
        let counts = match count_votes(utt, taxonomy) {
            Ok(c) => c,
            Err(AggregationError::NeedsRelabel(_)) => {
                awaiting += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        scorable += 1;
        let id = utt.utterance_id.as_str();
        let recs = [
            aggregate_mr(id, &counts, taxonomy),
            aggregate_pr(id, &counts, taxonomy),
            aggregate_ar(id, &counts),
        ];
        for (slot, rec) in dropped.iter_mut().zip(&recs) {
            if rec.is_dropped() {
                *slot += 1;
            }
        }
    }
    let rules = Rule::ALL
        .iter()
        .zip(dropped)
        .map(|(&rule, n)| RuleLoss {
            rule,
            dropped: n,
            ratio: if scorable == 0 { 0.0 } else { n as f64 / scorable as f64 },
        })
        .collect();
    Ok(DataLossReport {
        scorable,
        awaiting_relabel: awaiting,
        rules,
    })
}
