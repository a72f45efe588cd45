//! Batching, retries and resumable state around a transport.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::transport::{ChatRequest, ChatTransport};
use super::{build_prompt, encode_batch, parse_response, ClientConfig, RelabelError, RelabelItem, RelabelResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub client: ClientConfig,
    /// Extra attempts after the first for items still unanswered.
    pub max_retries: usize,
    /// Batches dispatched at once.
    pub in_flight: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            client: ClientConfig::default(),
            max_retries: 3,
            in_flight: 4,
        }
    }
}

/// Accepted answers keyed by utterance id. Saved between runs so a rerun only
/// asks for what is still missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelabelState {
    pub answered: BTreeMap<String, RelabelResult>,
}

impl RelabelState {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(std::io::Error::other),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e),
        }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let bytes = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, bytes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ItemOutcome {
    Answered,
    /// Answered in an earlier run.
    Resumed,
    /// Gave up; the reference stands.
    Fallback(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    /// One per item, in item order. Fallbacks carry the unchanged reference.
    pub results: Vec<RelabelResult>,
    pub outcomes: Vec<ItemOutcome>,
    pub requests: usize,
}

impl PipelineReport {
    pub fn fallbacks(&self) -> usize {
        self.outcomes.iter().filter(|o| matches!(o, ItemOutcome::Fallback(_))).count()
    }

    /// Results that came from the model, this run or earlier.
    pub fn answered(&self) -> Vec<RelabelResult> {
        self.results
            .iter()
            .zip(&self.outcomes)
            .filter(|(_, o)| !matches!(o, ItemOutcome::Fallback(_)))
            .map(|(r, _)| r.clone())
            .collect()
    }
}

struct BatchOutcome {
    answered: Vec<RelabelResult>,
    failed: Vec<(usize, String)>,
    requests: usize,
}

fn run_batch(batch: &[RelabelItem], transport: &dyn ChatTransport, cfg: &PipelineConfig) -> BatchOutcome {
    let mut remaining: Vec<RelabelItem> = batch.to_vec();
    let mut problems: BTreeMap<usize, String> = BTreeMap::new();
    let mut answered = Vec::new();
    let mut requests = 0;
    for _ in 0..=cfg.max_retries {
        if remaining.is_empty() {
            break;
        }
        let attempt = encode_batch(&remaining).map_err(|e| e.to_string()).and_then(|wire| {
            requests += 1;
            let request = ChatRequest::new(&cfg.client, build_prompt(), wire);
            let raw = transport.complete(&request).map_err(|e| e.to_string())?;
            parse_response(&raw, &remaining).map_err(|e| e.to_string())
        });
        match attempt {
            Ok(parsed) => {
                let flagged: BTreeMap<usize, String> =
                    parsed.flagged.into_iter().map(|f| (f.index, f.problem)).collect();
                answered.extend(parsed.results);
                remaining.retain(|it| flagged.contains_key(&it.index));
                problems = flagged;
            }
            Err(problem) => {
                log::warn!("relabel batch of {} failed: {problem}", remaining.len());
                problems = remaining.iter().map(|it| (it.index, problem.clone())).collect();
            }
        }
    }
    let failed = remaining
        .iter()
        .map(|it| (it.index, problems.get(&it.index).cloned().unwrap_or_default()))
        .collect();
    BatchOutcome {
        answered,
        failed,
        requests,
    }
}

/// Sends every item not already in `state`, updating `state` as answers
/// arrive. Items still unanswered after the retries keep their reference.
pub fn run_pipeline(
    items: &[RelabelItem],
    transport: &dyn ChatTransport,
    cfg: &PipelineConfig,
    state: &mut RelabelState,
) -> Result<PipelineReport, RelabelError> {
    cfg.client.validate()?;
    let in_flight = cfg.in_flight.max(1);
    let pending: Vec<RelabelItem> = items
        .iter()
        .filter(|it| !state.answered.contains_key(&it.utterance_id))
        .cloned()
        .collect();
    let batches: Vec<&[RelabelItem]> = pending.chunks(cfg.client.batch_size).collect();

    let mut failed: BTreeMap<usize, String> = BTreeMap::new();
    let mut fresh: BTreeMap<usize, ()> = BTreeMap::new();
    let mut requests = 0;
    for wave in batches.chunks(in_flight) {
        let outcomes: Vec<BatchOutcome> = std::thread::scope(|s| {
            let handles: Vec<_> = wave
                .iter()
                .map(|batch| s.spawn(move || run_batch(batch, transport, cfg)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("relabel worker panicked")).collect()
        });
        // applied in batch order so state does not depend on thread timing
        for out in outcomes {
            requests += out.requests;
            for r in out.answered {
                fresh.insert(r.index, ());
                state.answered.insert(r.utterance_id.clone(), r);
            }
            failed.extend(out.failed);
        }
    }

    let mut results = Vec::with_capacity(items.len());
    let mut outcomes = Vec::with_capacity(items.len());
    for item in items {
        match state.answered.get(&item.utterance_id) {
            Some(r) => {
                let mut r = r.clone();
                r.index = item.index;
                results.push(r);
                outcomes.push(if fresh.contains_key(&item.index) {
                    ItemOutcome::Answered
                } else {
                    ItemOutcome::Resumed
                });
            }
            None => {
                let problem = failed.get(&item.index).cloned().unwrap_or_default();
                log::warn!("{}: keeping reference distribution ({problem})", item.utterance_id);
                results.push(RelabelResult::unchanged(item));
                outcomes.push(ItemOutcome::Fallback(problem));
            }
        }
    }
    Ok(PipelineReport {
        results,
        outcomes,
        requests,
    })
}

#[cfg(test)]
mod tests {
    use super::super::transport::TransportError;
    use super::super::{decode_batch, POD_PRIMARY_CLASSES};
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    fn items(n: usize) -> Vec<RelabelItem> {
        (0..n)
            .map(|i| RelabelItem {
                index: i,
                utterance_id: format!("u{i:03}"),
                descriptions: format!("word{i}"),
                reference: vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            })
            .collect()
    }

    /// Answers every item by moving 0.5 onto `happy`, 0-based keys.
    fn answer(wire: &str) -> String {
        let decoded = decode_batch(wire).unwrap();
        let body: Vec<String> = decoded
            .iter()
            .enumerate()
            .map(|(i, (_, r))| {
                let mut d = r.clone();
                d[5] -= 0.5;
                d[7] += 0.5;
                let kv: Vec<String> = POD_PRIMARY_CLASSES.iter().zip(&d).map(|(c, v)| format!("\"{c}\": {v}")).collect();
                format!("\"{i}\": {{{}, \"reason\": \"happier\"}}", kv.join(", "))
            })
            .collect();
        format!("{{{}}}", body.join(", "))
    }

    fn cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    #[test]
    fn all_answered() {
        let calls = AtomicUsize::new(0);
        let transport = |req: &ChatRequest| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok::<_, TransportError>(answer(&req.user))
        };
        let mut state = RelabelState::default();
        let report = run_pipeline(&items(65), &transport, &cfg(), &mut state).unwrap();
        assert_eq!(report.requests, 3);
        assert_eq!(report.fallbacks(), 0);
        assert!(report.results.iter().all(|r| r.modified && r.adjusted[7] == 0.5));
        assert_eq!(state.answered.len(), 65);
        assert_eq!(report.results[64].utterance_id, "u064");
    }

    #[test]
    fn retries_then_falls_back() {
        let calls = AtomicUsize::new(0);
        let transport = |_: &ChatRequest| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err::<String, _>(TransportError::Http("503".into()))
        };
        let mut state = RelabelState::default();
        let report = run_pipeline(&items(2), &transport, &cfg(), &mut state).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 4);
        assert_eq!(report.fallbacks(), 2);
        assert!(report.results.iter().all(|r| !r.modified && r.adjusted == r.reference));
        assert!(state.answered.is_empty());
    }

    #[test]
    fn flagged_items_are_retried_alone() {
        let seen = Mutex::new(Vec::new());
        let transport = |req: &ChatRequest| {
            let n = decode_batch(&req.user).unwrap().len();
            seen.lock().unwrap().push(n);
            if n == 3 {
                // second item sums to 0.9
                let good = "{'angry':0,'sad':0,'disgust':0,'contempt':0,'fear':0,'neutral':1,'surprise':0,'happy':0}";
                let bad = "{'angry':0,'sad':0,'disgust':0,'contempt':0,'fear':0,'neutral':0.9,'surprise':0,'happy':0}";
                Ok::<_, TransportError>(format!("{{'0':{good},'1':{bad},'2':{good}}}"))
            } else {
                Ok(answer(&req.user))
            }
        };
        let mut state = RelabelState::default();
        let report = run_pipeline(&items(3), &transport, &cfg(), &mut state).unwrap();
        assert_eq!(*seen.lock().unwrap(), vec![3, 1]);
        assert_eq!(report.fallbacks(), 0);
        assert!(!report.results[0].modified);
        assert!(report.results[1].modified);
    }

    #[test]
    fn resume_only_requests_missing() {
        let fail_after = AtomicUsize::new(0);
        let flaky = |req: &ChatRequest| {
            if fail_after.fetch_add(1, Ordering::SeqCst) == 0 {
                Ok(answer(&req.user))
            } else {
                Err(TransportError::Http("down".into()))
            }
        };
        let one_at_a_time = PipelineConfig {
            in_flight: 1,
            ..cfg()
        };
        let mut state = RelabelState::default();
        let first = run_pipeline(&items(45), &flaky, &one_at_a_time, &mut state).unwrap();
        assert_eq!(first.fallbacks(), 15);
        assert_eq!(state.answered.len(), 30);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        state.save(&path).unwrap();
        let mut state = RelabelState::load(&path).unwrap();

        let sizes = Mutex::new(Vec::new());
        let healthy = |req: &ChatRequest| {
            sizes.lock().unwrap().push(decode_batch(&req.user).unwrap().len());
            Ok::<_, TransportError>(answer(&req.user))
        };
        let second = run_pipeline(&items(45), &healthy, &one_at_a_time, &mut state).unwrap();
        assert_eq!(*sizes.lock().unwrap(), vec![15]);
        assert_eq!(second.fallbacks(), 0);
        assert_eq!(second.outcomes[0], ItemOutcome::Resumed);
        assert_eq!(second.outcomes[44], ItemOutcome::Answered);
        let third = run_pipeline(&items(45), &healthy, &one_at_a_time, &mut state).unwrap();
        assert_eq!(third.requests, 0);
        assert_eq!(third.results, second.results);
    }
}
