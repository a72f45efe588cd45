//! Speaker-independent fold layouts, assignment and leakage checks.
//!
//! A scheme is a set of disjoint speaker groups (dyads or sessions) and a list
//! of folds naming which groups go to train, dev and test. Assignment routes
//! each utterance through its dyad or speaker key, so both partners of a
//! dialogue always land in the same split.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::UtteranceAnnotations;

#[derive(Debug, thiserror::Error)]
pub enum PartitionError {
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("invalid scheme {scheme:?}: {message}")]
    InvalidScheme { scheme: String, message: String },
    #[error("utterance {utterance_id:?}: {key_kind} {key:?} is not in any group of scheme {scheme:?}")]
    UnmappedKey {
        scheme: String,
        utterance_id: String,
        key_kind: GroupKey,
        key: String,
    },
    #[error("utterance {utterance_id:?} has no dyad_id but scheme {scheme:?} is keyed by dyad")]
    MissingDyad { scheme: String, utterance_id: String },
    #[error("utterance {utterance_id:?} maps to groups {groups:?}")]
    MultipleGroups {
        utterance_id: String,
        groups: Vec<String>,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which utterance field selects the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Dyad,
    Speaker,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupKey::Dyad => "dyad",
            GroupKey::Speaker => "speaker",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerGroup {
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl FoldSpec {
    pub fn groups(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemeConfig", into = "SchemeConfig")]
pub struct PartitionScheme {
    name: String,
    key: GroupKey,
    groups: Vec<SpeakerGroup>,
    folds: Vec<FoldSpec>,
}

#[derive(Serialize, Deserialize)]
struct SchemeConfig {
    name: String,
    key: GroupKey,
    groups: Vec<SpeakerGroup>,
    folds: Vec<FoldSpec>,
}

impl TryFrom<SchemeConfig> for PartitionScheme {
    type Error = PartitionError;

    fn try_from(c: SchemeConfig) -> Result<Self, Self::Error> {
        PartitionScheme::new(c.name, c.key, c.groups, c.folds)
    }
}

impl From<PartitionScheme> for SchemeConfig {
    fn from(s: PartitionScheme) -> Self {
        SchemeConfig {
            name: s.name,
            key: s.key,
            groups: s.groups,
            folds: s.folds,
        }
    }
}

/// Fixed train/dev/test speaker lists, for corpora released with one split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitFile {
    pub name: String,
    pub key: GroupKey,
    pub train: Vec<String>,
    #[serde(default)]
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

pub const BUILTIN_SCHEMES: [&str; 4] = ["iemocap-5fold", "improv-6fold", "cremad-5fold", "nnime-5fold"];

fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "iemocap-5fold" => include_str!("schemes/iemocap-5fold.json"),
        "improv-6fold" => include_str!("schemes/improv-6fold.json"),
        "cremad-5fold" => include_str!("schemes/cremad-5fold.json"),
        "nnime-5fold" => include_str!("schemes/nnime-5fold.json"),
        _ => return None,
    })
}

pub fn builtin_scheme(name: &str) -> Result<PartitionScheme, PartitionError> {
    let src = builtin_source(name).ok_or_else(|| PartitionError::UnknownScheme(name.to_string()))?;
    Ok(serde_json::from_str(src)?)
}

impl PartitionScheme {
    pub fn new(
        name: String,
        key: GroupKey,
        groups: Vec<SpeakerGroup>,
        folds: Vec<FoldSpec>,
    ) -> Result<Self, PartitionError> {
        let invalid = |message: String| PartitionError::InvalidScheme {
            scheme: name.clone(),
            message,
        };
        let mut group_names = HashSet::new();
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for g in &groups {
            if !group_names.insert(g.name.as_str()) {
                return Err(invalid(format!("group {:?} defined twice", g.name)));
            }
            for m in &g.members {
                if let Some(prev) = owner.insert(m.as_str(), g.name.as_str()) {
                    return Err(invalid(format!(
                        "{key} {m:?} belongs to both {prev:?} and {:?}",
                        g.name
                    )));
                }
            }
        }
        if folds.is_empty() {
            return Err(invalid("no folds".into()));
        }
        for (i, fold) in folds.iter().enumerate() {
            let n = i + 1;
            if fold.train.is_empty() || fold.test.is_empty() {
                return Err(invalid(format!("fold {n} needs train and test groups")));
            }
            let mut seen: HashMap<&str, Split> = HashMap::new();
            for split in Split::ALL {
                for g in fold.groups(split) {
                    if !group_names.contains(g.as_str()) {
                        return Err(invalid(format!("fold {n} names unknown group {g:?}")));
                    }
                    if let Some(prev) = seen.insert(g.as_str(), split) {
                        return Err(invalid(format!(
                            "fold {n} puts group {g:?} in both {prev} and {split}"
                        )));
                    }
                }
            }
        }
        Ok(PartitionScheme {
            name,
            key,
            groups,
            folds,
        })
    }

    pub fn from_split_file(split: SplitFile) -> Result<Self, PartitionError> {
        let mut groups = vec![
            SpeakerGroup {
                name: "train".into(),
                members: split.train,
            },
            SpeakerGroup {
                name: "test".into(),
                members: split.test,
            },
        ];
        let mut fold = FoldSpec {
            train: vec!["train".into()],
            dev: vec![],
            test: vec!["test".into()],
        };
        if !split.dev.is_empty() {
            groups.push(SpeakerGroup {
                name: "dev".into(),
                members: split.dev,
            });
            fold.dev.push("dev".into());
        }
        PartitionScheme::new(split.name, split.key, groups, vec![fold])
    }

    /// Loads either a full scheme or a fixed split file.
    pub fn from_json_file(path: &Path) -> Result<Self, PartitionError> {
        let text = std::fs::read_to_string(path).map_err(|source| PartitionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("folds").is_some() {
            Ok(serde_json::from_value(value)?)
        } else {
            PartitionScheme::from_split_file(serde_json::from_value(value)?)
        }
    }

    /// Builtin name or path to a JSON scheme/split file.
    pub fn resolve(name_or_path: &str) -> Result<Self, PartitionError> {
        if builtin_source(name_or_path).is_some() {
            builtin_scheme(name_or_path)
        } else if Path::new(name_or_path).exists() {
            PartitionScheme::from_json_file(Path::new(name_or_path))
        } else {
            Err(PartitionError::UnknownScheme(name_or_path.to_string()))
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn key(&self) -> GroupKey {
        self.key
    }

    pub fn groups(&self) -> &[SpeakerGroup] {
        &self.groups
    }

    pub fn folds(&self) -> &[FoldSpec] {
        &self.folds
    }

    fn member_index(&self) -> HashMap<&str, Vec<&str>> {
        let mut idx: HashMap<&str, Vec<&str>> = HashMap::new();
        for g in &self.groups {
            for m in &g.members {
                idx.entry(m.as_str()).or_default().push(g.name.as_str());
            }
        }
        idx
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl FoldPlan {
    pub fn split(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, split: Split) -> &mut Vec<String> {
        match split {
            Split::Train => &mut self.train,
            Split::Dev => &mut self.dev,
            Split::Test => &mut self.test,
        }
    }
}

/// Utterance ids per split for every fold, in corpus order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub scheme: String,
    pub folds: Vec<FoldPlan>,
}

impl PartitionPlan {
    pub fn from_json_file(path: &Path) -> Result<Self, PartitionError> {
        let text = std::fs::read_to_string(path).map_err(|source| PartitionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// 1-based fold lookup.
    pub fn fold(&self, number: usize) -> Option<&FoldPlan> {
        number.checked_sub(1).and_then(|i| self.folds.get(i))
    }
}

pub fn assign(
    scheme: &PartitionScheme,
    corpus: &[UtteranceAnnotations],
) -> Result<PartitionPlan, PartitionError> {
    let index = scheme.member_index();
    let mut group_of = Vec::with_capacity(corpus.len());
    for utt in corpus {
        let key = match scheme.key {
            GroupKey::Speaker => utt.speaker_id.as_str(),
            GroupKey::Dyad => utt.dyad_id.as_deref().ok_or_else(|| PartitionError::MissingDyad {
                scheme: scheme.name.clone(),
                utterance_id: utt.utterance_id.clone(),
            })?,
        };
        match index.get(key).map(Vec::as_slice) {
            Some([g]) => group_of.push(*g),
            Some(many) => {
                return Err(PartitionError::MultipleGroups {
                    utterance_id: utt.utterance_id.clone(),
                    groups: many.iter().map(|s| s.to_string()).collect(),
                })
            }
            None => {
                return Err(PartitionError::UnmappedKey {
                    scheme: scheme.name.clone(),
                    utterance_id: utt.utterance_id.clone(),
                    key_kind: scheme.key,
                    key: key.to_string(),
                })
            }
        }
    }
    let folds = scheme
        .folds
        .iter()
        .map(|spec| {
            let mut split_of: HashMap<&str, Split> = HashMap::new();
            for split in Split::ALL {
                for g in spec.groups(split) {
                    split_of.insert(g.as_str(), split);
                }
            }
            let mut plan = FoldPlan::default();
            for (utt, group) in corpus.iter().zip(&group_of) {
                if let Some(&split) = split_of.get(group) {
                    plan.split_mut(split).push(utt.utterance_id.clone());
                }
            }
            plan
        })
        .collect();
    Ok(PartitionPlan {
        scheme: scheme.name.clone(),
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    SpeakerOverlap {
        fold: usize,
        speaker: String,
        splits: Vec<Split>,
    },
    DyadOverlap {
        fold: usize,
        dyad: String,
        splits: Vec<Split>,
    },
    DuplicateUtterance {
        fold: usize,
        utterance_id: String,
        splits: Vec<Split>,
    },
    UnknownUtterance {
        fold: usize,
        utterance_id: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |s: &[Split]| s.iter().map(Split::to_string).collect::<Vec<_>>().join("+");
        match self {
            Violation::SpeakerOverlap { fold, speaker, splits } => {
                write!(f, "fold {fold}: speaker {speaker} appears in {}", list(splits))
            }
            Violation::DyadOverlap { fold, dyad, splits } => {
                write!(f, "fold {fold}: dyad {dyad} spans {}", list(splits))
            }
            Violation::DuplicateUtterance { fold, utterance_id, splits } => {
                write!(f, "fold {fold}: utterance {utterance_id} listed in {}", list(splits))
            }
            Violation::UnknownUtterance { fold, utterance_id } => {
                write!(f, "fold {fold}: utterance {utterance_id} is not in the corpus")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LeakageReport {
    pub violations: Vec<Violation>,
}

impl LeakageReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Flags speakers or dyads that reach more than one split of the same fold.
pub fn check_leakage(plan: &PartitionPlan, corpus: &[UtteranceAnnotations]) -> LeakageReport {
    let by_id: HashMap<&str, &UtteranceAnnotations> =
        corpus.iter().map(|u| (u.utterance_id.as_str(), u)).collect();
    let mut violations = Vec::new();
    for (i, fold) in plan.folds.iter().enumerate() {
        let n = i + 1;
        let mut speakers: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
        let mut dyads: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
        let mut utts: BTreeMap<&str, Vec<Split>> = BTreeMap::new();
        for split in Split::ALL {
            for id in fold.split(split) {
                utts.entry(id.as_str()).or_default().push(split);
                let Some(utt) = by_id.get(id.as_str()) else {
                    violations.push(Violation::UnknownUtterance {
                        fold: n,
                        utterance_id: id.clone(),
                    });
                    continue;
                };
                speakers.entry(utt.speaker_id.as_str()).or_default().insert(split);
                if let Some(d) = utt.dyad_id.as_deref() {
                    dyads.entry(d).or_default().insert(split);
                }
            }
        }
        for (id, splits) in utts {
            if splits.len() > 1 {
                violations.push(Violation::DuplicateUtterance {
                    fold: n,
                    utterance_id: id.to_string(),
                    splits,
                });
            }
        }
        for (speaker, splits) in speakers {
            if splits.len() > 1 {
                violations.push(Violation::SpeakerOverlap {
                    fold: n,
                    speaker: speaker.to_string(),
                    splits: splits.into_iter().collect(),
                });
            }
        }
        for (dyad, splits) in dyads {
            if splits.len() > 1 {
                violations.push(Violation::DyadOverlap {
                    fold: n,
                    dyad: dyad.to_string(),
                    splits: splits.into_iter().collect(),
                });
            }
        }
    }
    LeakageReport { violations }
}
