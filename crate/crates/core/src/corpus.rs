//! Annotation, taxonomy and prediction-file data model.
//!
//! Every on-disk format here is JSON Lines: one utterance (or one prediction)
//! per line, so files stay diffable and can be streamed.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use crate::aggregation::{LabelKind, LabelRecord};

/// Class order of the eight-class primary emotion taxonomy.
pub const POD_PRIMARY_CLASSES: [&str; 8] = [
    "angry", "sad", "disgust", "contempt", "fear", "neutral", "surprise", "happy",
];

pub const POD_PRIMARY_NAME: &str = "pod-primary";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown emotion class {class:?}")]
    UnknownClass { line: usize, class: String },
    #[error("line {line}: duplicate utterance_id {utterance_id:?}")]
    DuplicateUtterance { line: usize, utterance_id: String },
    #[error("line {line}: utterance {utterance_id:?} has no votes")]
    EmptyVotes { line: usize, utterance_id: String },
    #[error("line {line}: vote by {rater_id:?} has neither emotions nor a typed description")]
    EmptyVote { line: usize, rater_id: String },
    #[error("line {line}: vote by {rater_id:?} lists {class:?} more than once")]
    RepeatedClass {
        line: usize,
        rater_id: String,
        class: String,
    },
    #[error("line {line}: distribution has {got} entries, taxonomy has {expected}")]
    WrongDimension {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: entry {index} is {value}, expected a finite non-negative number")]
    InvalidEntry { line: usize, index: usize, value: f64 },
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
}

/// Ordered list of emotion classes. The order fixes vector layout everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyConfig", into = "TaxonomyConfig")]
pub struct EmotionTaxonomy {
    name: String,
    classes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TaxonomyConfig {
    name: String,
    classes: Vec<String>,
}

impl TryFrom<TaxonomyConfig> for EmotionTaxonomy {
    type Error = CorpusError;

    fn try_from(cfg: TaxonomyConfig) -> Result<Self, Self::Error> {
        EmotionTaxonomy::new(cfg.name, cfg.classes)
    }
}

impl From<EmotionTaxonomy> for TaxonomyConfig {
    fn from(t: EmotionTaxonomy) -> Self {
        TaxonomyConfig {
            name: t.name,
            classes: t.classes,
        }
    }
}

impl EmotionTaxonomy {
    pub fn new<S: Into<String>>(name: S, classes: Vec<String>) -> Result<Self, CorpusError> {
        if classes.len() < 2 {
            return Err(CorpusError::InvalidTaxonomy(format!(
                "need at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &classes {
            if c.is_empty() {
                return Err(CorpusError::InvalidTaxonomy("empty class name".into()));
            }
            if !seen.insert(c.as_str()) {
                return Err(CorpusError::InvalidTaxonomy(format!(
                    "duplicate class name {c:?}"
                )));
            }
        }
        Ok(EmotionTaxonomy {
            name: name.into(),
            classes,
        })
    }

    /// The eight-class primary taxonomy used for relabeling.
    pub fn pod_primary() -> Self {
        EmotionTaxonomy {
            name: POD_PRIMARY_NAME.to_string(),
            classes: POD_PRIMARY_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Resolves a builtin taxonomy by name.
    pub fn builtin(name: &str) -> Option<Self> {
        (name == POD_PRIMARY_NAME).then(Self::pod_primary)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Number of classes, `C`.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Case-sensitive exact lookup.
    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterVote {
    pub rater_id: String,
    #[serde(default)]
    pub emotions: Vec<String>,
    #[serde(default)]
    pub typed_description: Option<String>,
}

impl RaterVote {
    pub fn has_description(&self) -> bool {
        self.typed_description
            .as_deref()
            .is_some_and(|d| !d.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceAnnotations {
    pub utterance_id: String,
    pub dataset: String,
    pub speaker_id: String,
    #[serde(default)]
    pub dyad_id: Option<String>,
    pub votes: Vec<RaterVote>,
}

impl UtteranceAnnotations {
    /// True when at least one rater picked a class.
    pub fn has_class_votes(&self) -> bool {
        self.votes.iter().any(|v| !v.emotions.is_empty())
    }

    /// Typed descriptions in rater order, verbatim.
    pub fn typed_descriptions(&self) -> impl Iterator<Item = &str> {
        self.votes
            .iter()
            .filter(|v| v.has_description())
            .filter_map(|v| v.typed_description.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub utterance_id: String,
    pub distribution: Vec<f64>,
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Iterates non-blank lines with 1-based line numbers.
fn numbered_lines<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, String), CorpusError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(CorpusError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })),
        })
}

pub fn load_annotations(
    path: &Path,
    taxonomy: &EmotionTaxonomy,
) -> Result<Vec<UtteranceAnnotations>, CorpusError> {
    read_annotations(open(path)?, taxonomy)
}

pub fn read_annotations<R: BufRead>(
    reader: R,
    taxonomy: &EmotionTaxonomy,
) -> Result<Vec<UtteranceAnnotations>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for item in numbered_lines(reader) {
        let (line, text) = item?;
        let utt: UtteranceAnnotations =
            serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
                line,
                message: e.to_string(),
            })?;
        validate_utterance(&utt, taxonomy, line)?;
        if !ids.insert(utt.utterance_id.clone()) {
            return Err(CorpusError::DuplicateUtterance {
                line,
                utterance_id: utt.utterance_id,
            });
        }
        out.push(utt);
    }
    Ok(out)
}

fn validate_utterance(
    utt: &UtteranceAnnotations,
    taxonomy: &EmotionTaxonomy,
    line: usize,
) -> Result<(), CorpusError> {
    if utt.votes.is_empty() {
        return Err(CorpusError::EmptyVotes {
            line,
            utterance_id: utt.utterance_id.clone(),
        });
    }
    for vote in &utt.votes {
        if vote.emotions.is_empty() && !vote.has_description() {
            return Err(CorpusError::EmptyVote {
                line,
                rater_id: vote.rater_id.clone(),
            });
        }
        let mut seen = HashSet::new();
        for class in &vote.emotions {
            if taxonomy.index_of(class).is_none() {
                return Err(CorpusError::UnknownClass {
                    line,
                    class: class.clone(),
                });
            }
            if !seen.insert(class.as_str()) {
                return Err(CorpusError::RepeatedClass {
                    line,
                    rater_id: vote.rater_id.clone(),
                    class: class.clone(),
                });
            }
        }
    }
    Ok(())
}

pub fn load_predictions(
    path: &Path,
    taxonomy: &EmotionTaxonomy,
) -> Result<Vec<PredictionRecord>, CorpusError> {
    read_predictions(open(path)?, taxonomy)
}

pub fn read_predictions<R: BufRead>(
    reader: R,
    taxonomy: &EmotionTaxonomy,
) -> Result<Vec<PredictionRecord>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for item in numbered_lines(reader) {
        let (line, text) = item?;
        let rec: PredictionRecord =
            serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
                line,
                message: e.to_string(),
            })?;
        validate_distribution(&rec.distribution, taxonomy.len(), line)?;
        if !ids.insert(rec.utterance_id.clone()) {
            return Err(CorpusError::DuplicateUtterance {
                line,
                utterance_id: rec.utterance_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_labels(path: &Path, taxonomy: &EmotionTaxonomy) -> Result<Vec<LabelRecord>, CorpusError> {
    read_labels(open(path)?, taxonomy)
}

/// Reads label JSONL, checking classes and dimensions against `taxonomy`.
pub fn read_labels<R: BufRead>(reader: R, taxonomy: &EmotionTaxonomy) -> Result<Vec<LabelRecord>, CorpusError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for item in numbered_lines(reader) {
        let (line, text) = item?;
        let rec: LabelRecord = serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
            line,
            message: e.to_string(),
        })?;
        match &rec.kind {
            LabelKind::Single(class) if taxonomy.index_of(class).is_none() => {
                return Err(CorpusError::UnknownClass {
                    line,
                    class: class.clone(),
                })
            }
            LabelKind::Distribution(d) => validate_distribution(d, taxonomy.len(), line)?,
            _ => {}
        }
        if !ids.insert(rec.utterance_id.clone()) {
            return Err(CorpusError::DuplicateUtterance {
                line,
                utterance_id: rec.utterance_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub(crate) fn validate_distribution(
    values: &[f64],
    classes: usize,
    line: usize,
) -> Result<(), CorpusError> {
    if values.len() != classes {
        return Err(CorpusError::WrongDimension {
            line,
            expected: classes,
            got: values.len(),
        });
    }
    if let Some((index, &value)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(CorpusError::InvalidEntry { line, index, value });
    }
    Ok(())
}

/// Writes any serializable records as JSON Lines.
pub fn write_jsonl<T: Serialize, W: Write>(mut writer: W, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Id → position lookup, used when aligning files by utterance.
pub fn index_by_id<T, F>(records: &[T], id: F) -> HashMap<&str, usize>
where
    F: Fn(&T) -> &str,
{
    records
        .iter()
        .enumerate()
        .map(|(i, r)| (id(r), i))
        .collect()
}
