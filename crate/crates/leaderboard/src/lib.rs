//! Leaderboard service: validates prediction files, scores them against
//! server-side gold labels, keeps an append-only submission log and serves
//! rankings over HTTP.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use emokit::corpus::{read_predictions, CorpusError, PredictionRecord};
use emokit::evaluation::FoldCombine;
use emokit::scoring::{score_with_plan, FoldScored, PredictionFormat, ScoringError};

pub mod http;
pub mod ranking;
pub mod registry;
pub mod store;

pub use ranking::{column_key, LeaderboardRow, RadarPayload};
pub use registry::{Condition, Registry};

#[derive(Debug, thiserror::Error)]
pub enum LeaderboardError {
    #[error("missing or invalid API token")]
    Unauthorized,
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),
    #[error("dataset {dataset:?} has no condition {condition:?}")]
    UnknownCondition { dataset: String, condition: String },
    #[error("unknown submission {0:?}")]
    UnknownSubmission(String),
    #[error("no submissions for model(s): {}", .0.join(", "))]
    UnknownModel(Vec<String>),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("predictions: {0}")]
    Predictions(#[from] CorpusError),
    #[error("idempotency key {0:?} was already used for a different payload")]
    IdempotencyConflict(String),
    #[error("server setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Source of submission timestamps.
pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Utc::now)
}

/// Metadata part of a submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionMeta {
    pub model_name: String,
    pub dataset: String,
    pub condition: String,
    /// 1-based fold; omitted to score every fold of the condition's plan.
    #[serde(default)]
    pub fold: Option<usize>,
    #[serde(default)]
    pub format: PredictionFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub id: String,
    pub model_name: String,
    pub dataset: String,
    pub condition: String,
    pub fold: Option<usize>,
    pub format: PredictionFormat,
    pub created_at: DateTime<Utc>,
    pub idempotency_key: Option<String>,
    pub payload_sha256: String,
    pub predictions: Vec<PredictionRecord>,
    pub score: FoldScored,
}

/// What the API returns for a submission; predictions are left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionView {
    pub id: String,
    pub model_name: String,
    pub dataset: String,
    pub condition: String,
    pub fold: Option<usize>,
    pub created_at: DateTime<Utc>,
    pub n_predictions: usize,
    pub score: FoldScored,
}

impl From<&Submission> for SubmissionView {
    fn from(s: &Submission) -> Self {
        SubmissionView {
            id: s.id.clone(),
            model_name: s.model_name.clone(),
            dataset: s.dataset.clone(),
            condition: s.condition.clone(),
            fold: s.fold,
            created_at: s.created_at,
            n_predictions: s.predictions.len(),
            score: s.score.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmitOutcome {
    pub submission: SubmissionView,
    /// False when an earlier submission with the same idempotency key was
    /// returned instead.
    pub created: bool,
}

#[derive(Default)]
struct Index {
    submissions: Vec<Submission>,
    by_id: HashMap<String, usize>,
    by_key: HashMap<String, usize>,
}

impl Index {
    fn push(&mut self, s: Submission) {
        let i = self.submissions.len();
        self.by_id.insert(s.id.clone(), i);
        if let Some(k) = &s.idempotency_key {
            self.by_key.insert(k.clone(), i);
        }
        self.submissions.push(s);
    }

    fn replayed(subs: Vec<Submission>) -> Self {
        let mut idx = Index::default();
        for s in subs {
            idx.push(s);
        }
        idx
    }

    /// Existing submission for `key`, or a conflict if its payload differs.
    fn lookup_key(&self, key: Option<&str>, payload_sha256: &str) -> Result<Option<&Submission>, LeaderboardError> {
        let Some(key) = key else { return Ok(None) };
        match self.by_key.get(key).map(|&i| &self.submissions[i]) {
            Some(s) if s.payload_sha256 == payload_sha256 => Ok(Some(s)),
            Some(_) => Err(LeaderboardError::IdempotencyConflict(key.to_string())),
            None => Ok(None),
        }
    }
}

pub struct Leaderboard {
    registry: Registry,
    index: RwLock<Index>,
    store: Mutex<store::Store>,
    clock: Clock,
}

fn payload_hash(meta: &SubmissionMeta, predictions: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(meta).expect("metadata serializes"));
    h.update(b"\n");
    h.update(predictions);
    hex::encode(h.finalize())
}

impl Leaderboard {
    /// Loads gold data from `data_dir/datasets` and replays the log.
    pub fn open(data_dir: &Path, clock: Clock) -> Result<Self, LeaderboardError> {
        let registry = Registry::load(data_dir)?;
        Self::with_registry(data_dir, registry, clock)
    }

    pub fn with_registry(data_dir: &Path, registry: Registry, clock: Clock) -> Result<Self, LeaderboardError> {
        let (store, subs) = store::Store::open(data_dir)?;
        Ok(Leaderboard {
            registry,
            index: RwLock::new(Index::replayed(subs)),
            store: Mutex::new(store),
            clock,
        })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Validates, scores and records a submission.
    pub fn submit(
        &self,
        meta: SubmissionMeta,
        predictions_jsonl: &[u8],
        idempotency_key: Option<&str>,
    ) -> Result<SubmitOutcome, LeaderboardError> {
        if meta.model_name.trim().is_empty() {
            return Err(LeaderboardError::BadRequest("model_name is empty".into()));
        }
        let payload_sha256 = payload_hash(&meta, predictions_jsonl);
        if let Some(s) = self.index.read().expect("index lock").lookup_key(idempotency_key, &payload_sha256)? {
            return Ok(SubmitOutcome {
                submission: s.into(),
                created: false,
            });
        }

        let cond = self.registry.get(&meta.dataset, &meta.condition)?;
        let predictions = read_predictions(predictions_jsonl, &cond.taxonomy)?;
        let score = score_with_plan(
            &cond.taxonomy,
            &cond.golds,
            &predictions,
            cond.plan.as_ref(),
            meta.fold,
            meta.format,
            FoldCombine::Mean,
        )?;

        // single writer: re-check the key and append under the store lock
        let mut store = self.store.lock().expect("store lock");
        let mut index = self.index.write().expect("index lock");
        if let Some(s) = index.lookup_key(idempotency_key, &payload_sha256)? {
            return Ok(SubmitOutcome {
                submission: s.into(),
                created: false,
            });
        }
        let submission = Submission {
            id: format!("sub-{:06}", index.submissions.len() + 1),
            model_name: meta.model_name,
            dataset: meta.dataset,
            condition: meta.condition,
            fold: meta.fold,
            format: meta.format,
            created_at: (self.clock)(),
            idempotency_key: idempotency_key.map(String::from),
            payload_sha256,
            predictions,
            score,
        };
        store.append(&submission)?;
        let view = SubmissionView::from(&submission);
        log::info!("{} scored {:.4} for {}", view.id, view.score.result.macro_f1, view.model_name);
        index.push(submission);
        Ok(SubmitOutcome {
            submission: view,
            created: true,
        })
    }

    pub fn get(&self, id: &str) -> Result<SubmissionView, LeaderboardError> {
        let index = self.index.read().expect("index lock");
        index
            .by_id
            .get(id)
            .map(|&i| SubmissionView::from(&index.submissions[i]))
            .ok_or_else(|| LeaderboardError::UnknownSubmission(id.to_string()))
    }

    pub fn rankings(&self, dataset: &str, column: Option<&str>) -> Result<Vec<LeaderboardRow>, LeaderboardError> {
        if !self.registry.has_dataset(dataset) {
            return Err(LeaderboardError::UnknownDataset(dataset.to_string()));
        }
        Ok(ranking::rankings(&self.index.read().expect("index lock").submissions, dataset, column))
    }

    pub fn compare(&self, models: &[String]) -> Result<RadarPayload, LeaderboardError> {
        if models.is_empty() {
            return Err(LeaderboardError::BadRequest("ids is empty".into()));
        }
        ranking::compare(&self.index.read().expect("index lock").submissions, models).map_err(LeaderboardError::UnknownModel)
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("index lock").submissions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
