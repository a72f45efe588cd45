//! Relabeling typed descriptions with a chat-completion model.
//!
//! Each item pairs the free-text descriptions raters typed with the current
//! 8-class reference distribution. Items are sent 30 at a time; the model
//! answers with an adjusted distribution and a short reason per item.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::aggregation::{LabelKind, LabelRecord};
use crate::corpus::{EmotionTaxonomy, UtteranceAnnotations, POD_PRIMARY_CLASSES};

mod pipeline;
mod transport;

pub use pipeline::{run_pipeline, ItemOutcome, PipelineConfig, PipelineReport, RelabelState};
pub use transport::{
    ChatRequest, ChatTransport, FixtureTransport, HttpTransport, TransportError, API_KEY_ENV,
};

pub const PROMPT_VERSION: u32 = 14;
const PROMPT_V14: &str = include_str!("prompt_v14.txt");

/// Largest batch the prompt asks the model to handle.
pub const MAX_BATCH: usize = 30;
/// Accepted deviation of a returned distribution's sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-2;
/// Adjusted and reference distributions closer than this count as unchanged.
pub const MODIFIED_EPS: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RelabelError {
    #[error("batch must hold 1 to {MAX_BATCH} items, got {0}")]
    BatchSize(usize),
    #[error("item {index}: reference has {got} values, expected 8")]
    ReferenceDimension { index: usize, got: usize },
    #[error("item {index}: reference does not sum to 1")]
    ReferenceSum { index: usize },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("response is missing index(es) {0:?}")]
    MissingIndex(Vec<usize>),
    #[error("response contains unexpected index(es) {0:?}")]
    ExtraIndex(Vec<String>),
    #[error("relabel result for unknown utterance {0:?}")]
    UnknownUtterance(String),
    #[error("taxonomy {0:?} is not the 8-class primary taxonomy")]
    WrongTaxonomy(String),
}

/// The system prompt, byte-for-byte.
pub fn build_prompt() -> &'static str {
    PROMPT_V14
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientConfig {
    pub model: String,
    pub temperature: f64,
    pub seed: u64,
    pub json_mode: bool,
    pub batch_size: usize,
    pub cost_per_sample_usd: f64,
    pub base_url: String,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            model: "gpt-4-0125-preview".into(),
            temperature: 0.0,
            seed: 7,
            json_mode: true,
            batch_size: MAX_BATCH,
            cost_per_sample_usd: 0.0045,
            base_url: "https://api.openai.com/v1".into(),
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<(), RelabelError> {
        if self.batch_size == 0 || self.batch_size > MAX_BATCH {
            return Err(RelabelError::BatchSize(self.batch_size));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(RelabelError::Malformed(format!("temperature {}", self.temperature)));
        }
        Ok(())
    }
}

pub fn estimate_cost(n_samples: usize, cfg: &ClientConfig) -> f64 {
    n_samples as f64 * cfg.cost_per_sample_usd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelItem {
    pub index: usize,
    pub utterance_id: String,
    pub descriptions: String,
    /// Distribution in primary-taxonomy order.
    pub reference: Vec<f64>,
}

/// One row of the relabel artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelabelResult {
    #[serde(skip)]
    pub index: usize,
    pub utterance_id: String,
    pub reference: Vec<f64>,
    pub adjusted: Vec<f64>,
    pub reason: String,
    pub modified: bool,
}

impl RelabelResult {
    pub fn unchanged(item: &RelabelItem) -> Self {
        RelabelResult {
            index: item.index,
            utterance_id: item.utterance_id.clone(),
            reference: item.reference.clone(),
            adjusted: item.reference.clone(),
            reason: String::new(),
            modified: false,
        }
    }
}

fn check_primary(taxonomy: &EmotionTaxonomy) -> Result<(), RelabelError> {
    if taxonomy.classes().iter().map(String::as_str).eq(POD_PRIMARY_CLASSES) {
        Ok(())
    } else {
        Err(RelabelError::WrongTaxonomy(taxonomy.name().to_string()))
    }
}

/// One item per utterance with at least one typed description. Descriptions
/// are joined with commas. Utterances whose label was dropped get a uniform
/// reference.
pub fn collect_items(
    corpus: &[UtteranceAnnotations],
    labels: &[LabelRecord],
    taxonomy: &EmotionTaxonomy,
) -> Result<Vec<RelabelItem>, RelabelError> {
    check_primary(taxonomy)?;
    let by_id: HashMap<&str, &LabelRecord> = labels.iter().map(|l| (l.utterance_id.as_str(), l)).collect();
    let c = taxonomy.len();
    let mut items = Vec::new();
    for utt in corpus {
        let descriptions: Vec<&str> = utt.typed_descriptions().collect();
        if descriptions.is_empty() {
            continue;
        }
        let label = by_id
            .get(utt.utterance_id.as_str())
            .ok_or_else(|| RelabelError::UnknownUtterance(utt.utterance_id.clone()))?;
        let reference = label.target(taxonomy).unwrap_or_else(|| vec![1.0 / c as f64; c]);
        items.push(RelabelItem {
            index: items.len(),
            utterance_id: utt.utterance_id.clone(),
            descriptions: descriptions.join(","),
            reference,
        });
    }
    Ok(items)
}

/// Decimal form with at least one digit after the point.
pub fn format_value(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || !v.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        if matches!(ch, '\\' | '#' | '|') {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

/// `descriptions#d1,...,d8` per item, joined with `|`. `#`, `|` and `\` in
/// descriptions are backslash-escaped.
pub fn encode_batch(items: &[RelabelItem]) -> Result<String, RelabelError> {
    if items.is_empty() || items.len() > MAX_BATCH {
        return Err(RelabelError::BatchSize(items.len()));
    }
    let mut parts = Vec::with_capacity(items.len());
    for item in items {
        if item.reference.len() != POD_PRIMARY_CLASSES.len() {
            return Err(RelabelError::ReferenceDimension {
                index: item.index,
                got: item.reference.len(),
            });
        }
        if (item.reference.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(RelabelError::ReferenceSum { index: item.index });
        }
        let values: Vec<String> = item.reference.iter().map(|&v| format_value(v)).collect();
        parts.push(format!("{}#{}", escape(&item.descriptions), values.join(",")));
    }
    Ok(parts.join("|"))
}

/// Inverse of [`encode_batch`]: `(descriptions, reference)` per item.
pub fn decode_batch(wire: &str) -> Result<Vec<(String, Vec<f64>)>, RelabelError> {
    let mut items = Vec::new();
    let mut text = String::new();
    let mut values: Option<String> = None;
    let mut chars = wire.chars();
    let finish = |text: &mut String, values: &mut Option<String>, items: &mut Vec<(String, Vec<f64>)>| {
        let raw = values.take().ok_or_else(|| RelabelError::Malformed("item without '#'".into()))?;
        let parsed = raw
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| RelabelError::Malformed(format!("{v:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        items.push((std::mem::take(text), parsed));
        Ok::<(), RelabelError>(())
    };
    while let Some(ch) = chars.next() {
        match (ch, values.as_mut()) {
            ('|', _) => finish(&mut text, &mut values, &mut items)?,
            (_, Some(v)) => v.push(ch),
            ('\\', None) => text.push(chars.next().ok_or_else(|| RelabelError::Malformed("dangling escape".into()))?),
            ('#', None) => values = Some(String::new()),
            (_, None) => text.push(ch),
        }
    }
    finish(&mut text, &mut values, &mut items)?;
    Ok(items)
}

/// Item whose answer was rejected and should be asked again.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedItem {
    pub index: usize,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedBatch {
    pub results: Vec<RelabelResult>,
    pub flagged: Vec<FlaggedItem>,
}

fn parse_json(raw: &str) -> Result<Value, RelabelError> {
    let trimmed = raw.trim();
    let body = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.strip_suffix("```"))
        .unwrap_or(trimmed);
    serde_json::from_str(body)
        .or_else(|_| json5::from_str::<Value>(body))
        .map_err(|e| RelabelError::Malformed(e.to_string()))
}

fn is_entry(v: &Value) -> bool {
    v.as_object()
        .is_some_and(|o| POD_PRIMARY_CLASSES.iter().any(|c| o.keys().any(|k| k.eq_ignore_ascii_case(c))))
}

fn index_of_value(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.trim().to_string()),
        _ => None,
    }
}

/// Pulls `(index label, entry)` pairs out of the shapes models produce:
/// an object keyed by index, a list (with or without an `index` field), a
/// wrapper object holding either, or a bare entry for a one-item batch.
fn entries(v: &Value, batch_len: usize) -> Result<Vec<(String, &Value)>, RelabelError> {
    match v {
        Value::Array(list) => Ok(list
            .iter()
            .enumerate()
            .map(|(i, e)| (e.get("index").and_then(index_of_value).unwrap_or_else(|| i.to_string()), e))
            .collect()),
        Value::Object(map) if is_entry(v) => {
            let idx = map.get("index").and_then(index_of_value);
            match (idx, batch_len) {
                (Some(i), _) => Ok(vec![(i, v)]),
                (None, 1) => Ok(vec![("0".into(), v)]),
                (None, _) => Err(RelabelError::Malformed("single unindexed entry for a multi-item batch".into())),
            }
        }
        Value::Object(map) if !map.is_empty() && map.values().all(is_entry) => {
            Ok(map.iter().map(|(k, e)| (k.trim().to_string(), e)).collect())
        }
        Value::Object(map) if map.len() == 1 => entries(map.values().next().expect("one value"), batch_len),
        _ => Err(RelabelError::Malformed("no emotion entries found".into())),
    }
}

fn read_entry(entry: &Value, item: &RelabelItem) -> Result<RelabelResult, String> {
    let obj = entry.as_object().ok_or("entry is not an object")?;
    let lower: BTreeMap<String, &Value> = obj.iter().map(|(k, v)| (k.trim().to_ascii_lowercase(), v)).collect();
    let mut adjusted = Vec::with_capacity(POD_PRIMARY_CLASSES.len());
    for class in POD_PRIMARY_CLASSES {
        let v = lower.get(class).ok_or_else(|| format!("missing key {class:?}"))?;
        let x = match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
        .ok_or_else(|| format!("{class}: not a number"))?;
        if !x.is_finite() || x < 0.0 {
            return Err(format!("{class}: invalid value {x}"));
        }
        adjusted.push(x);
    }
    let sum: f64 = adjusted.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(format!("distribution sums to {sum}"));
    }
    adjusted.iter_mut().for_each(|x| *x /= sum);
    let reason = match lower.get("reason") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
        None => String::new(),
    };
    let modified = adjusted.iter().zip(&item.reference).any(|(a, r)| (a - r).abs() > MODIFIED_EPS);
    Ok(RelabelResult {
        index: item.index,
        utterance_id: item.utterance_id.clone(),
        reference: item.reference.clone(),
        adjusted,
        reason,
        modified,
    })
}

/// Maps a JSON-mode answer back onto `batch`. Indices may be 0- or 1-based.
/// Entries with bad values are flagged rather than accepted.
pub fn parse_response(raw: &str, batch: &[RelabelItem]) -> Result<ParsedBatch, RelabelError> {
    if batch.is_empty() || batch.len() > MAX_BATCH {
        return Err(RelabelError::BatchSize(batch.len()));
    }
    let value = parse_json(raw)?;
    let found = entries(&value, batch.len())?;
    let numeric: Vec<Option<usize>> = found.iter().map(|(k, _)| k.parse().ok()).collect();
    let one_based = !numeric.contains(&Some(0)) && numeric.contains(&Some(batch.len()));
    let mut slots: Vec<Option<&Value>> = vec![None; batch.len()];
    let mut extra = Vec::new();
    for ((label, entry), pos) in found.iter().zip(&numeric) {
        let pos = pos.and_then(|p| if one_based { p.checked_sub(1) } else { Some(p) });
        match pos {
            Some(p) if p < batch.len() && slots[p].is_none() => slots[p] = Some(entry),
            _ => extra.push(label.clone()),
        }
    }
    if !extra.is_empty() {
        return Err(RelabelError::ExtraIndex(extra));
    }
    let missing: Vec<usize> = slots
        .iter()
        .zip(batch)
        .filter(|(s, _)| s.is_none())
        .map(|(_, item)| item.index)
        .collect();
    if !missing.is_empty() {
        return Err(RelabelError::MissingIndex(missing));
    }
    let mut parsed = ParsedBatch::default();
    for (slot, item) in slots.into_iter().zip(batch) {
        match read_entry(slot.expect("checked"), item) {
            Ok(r) => parsed.results.push(r),
            Err(problem) => parsed.flagged.push(FlaggedItem {
                index: item.index,
                problem,
            }),
        }
    }
    Ok(parsed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelabelStats {
    pub relabeled: usize,
    pub modified: usize,
    pub modified_fraction: f64,
}

/// Replaces each relabeled utterance's label with its adjusted distribution.
/// Merging the same results twice yields the same labels.
pub fn merge(results: &[RelabelResult], labels: &[LabelRecord]) -> Result<(Vec<LabelRecord>, RelabelStats), RelabelError> {
    let mut out = labels.to_vec();
    let pos: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.utterance_id.as_str(), i)).collect();
    for r in results {
        let &i = pos
            .get(r.utterance_id.as_str())
            .ok_or_else(|| RelabelError::UnknownUtterance(r.utterance_id.clone()))?;
        if r.modified || out[i].is_dropped() {
            out[i] = LabelRecord {
                utterance_id: r.utterance_id.clone(),
                kind: LabelKind::Distribution(r.adjusted.clone()),
                smoothed: false,
            };
        }
    }
    let modified = results.iter().filter(|r| r.modified).count();
    let stats = RelabelStats {
        relabeled: results.len(),
        modified,
        modified_fraction: if results.is_empty() {
            0.0
        } else {
            modified as f64 / results.len() as f64
        },
    };
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NEUTRAL: [f64; 8] = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0];

    fn item(index: usize, descriptions: &str, reference: &[f64]) -> RelabelItem {
        RelabelItem {
            index,
            utterance_id: format!("u{index}"),
            descriptions: descriptions.into(),
            reference: reference.to_vec(),
        }
    }

    fn entry_json(d: &[f64; 8], reason: &str) -> String {
        let pairs: Vec<String> = POD_PRIMARY_CLASSES
            .iter()
            .zip(d)
            .map(|(c, v)| format!("\"{c}\": {v}"))
            .collect();
        format!("{{{}, \"reason\": \"{reason}\"}}", pairs.join(", "))
    }

    #[test]
    fn prompt_contents() {
        let p = build_prompt();
        assert!(p.contains("focus 25% on the \"descriptions\""));
        assert!(p.contains("30 data points each time"));
        assert!(p.contains("User Input: Concerned,Interest#0.0,0.0,0.0,0.0,0.0,1.0,0.0,0.0."));
        assert!(!p.contains("\\#") && !p.contains("\\%"));
        assert_eq!(p, build_prompt());
    }

    #[test]
    fn encode_example() {
        let wire = encode_batch(&[item(0, "Concerned,Interest", &NEUTRAL)]).unwrap();
        assert_eq!(wire, "Concerned,Interest#0.0,0.0,0.0,0.0,0.0,1.0,0.0,0.0");
        assert!(!wire.contains('|'));
    }

    #[test]
    fn encode_bounds() {
        let items: Vec<_> = (0..31).map(|i| item(i, "x", &NEUTRAL)).collect();
        assert_eq!(encode_batch(&items), Err(RelabelError::BatchSize(31)));
        assert_eq!(encode_batch(&[]), Err(RelabelError::BatchSize(0)));
        let two = encode_batch(&items[..2]).unwrap();
        assert_eq!(two.matches('|').count(), 1);
        assert!(matches!(
            encode_batch(&[item(0, "x", &[0.5, 0.5])]),
            Err(RelabelError::ReferenceDimension { got: 2, .. })
        ));
    }

    #[test]
    fn values_keep_precision() {
        assert_eq!(format_value(0.25), "0.25");
        assert_eq!(format_value(1.0), "1.0");
        assert_eq!(format_value(0.1), "0.1");
        let r = [0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125, 0.125];
        assert_eq!(encode_batch(&[item(0, "a#b|c", &r)]).unwrap(), "a\\#b\\|c#0.125,0.125,0.125,0.125,0.125,0.125,0.125,0.125");
    }

    #[test]
    fn parses_prompt_example() {
        let raw = "{'angry': 0.1, 'sad': 0.2, 'disgust': 0.2, 'contempt': 0.3, 'fear': 0.0, 'neutral': 0.2, 'surprise': 0.0, 'happy': 0.0, \"reason\": \"\"}";
        let parsed = parse_response(raw, &[item(0, "Concerned,Interest", &NEUTRAL)]).unwrap();
        assert!(parsed.flagged.is_empty());
        let r = &parsed.results[0];
        assert!((r.adjusted.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.adjusted[3], 0.3);
        assert!(r.modified);
    }

    #[test]
    fn flags_bad_sum() {
        let raw = entry_json(&[0.1, 0.2, 0.2, 0.2, 0.0, 0.2, 0.0, 0.0], "short");
        let parsed = parse_response(&raw, &[item(0, "x", &NEUTRAL)]).unwrap();
        assert!(parsed.results.is_empty());
        assert_eq!(parsed.flagged.len(), 1);
        assert!(parsed.flagged[0].problem.contains("sums to"));
    }

    #[test]
    fn response_shapes_and_bases() {
        let batch: Vec<_> = (0..3).map(|i| item(i, "w", &NEUTRAL)).collect();
        let e = entry_json(&NEUTRAL, "same");
        let keyed0 = format!("{{\"0\": {e}, \"1\": {e}, \"2\": {e}}}");
        let keyed1 = format!("{{\"1\": {e}, \"2\": {e}, \"3\": {e}}}");
        let wrapped = format!("{{\"results\": [{e}, {e}, {e}]}}");
        for raw in [keyed0, keyed1, wrapped] {
            let parsed = parse_response(&raw, &batch).unwrap();
            assert_eq!(parsed.results.len(), 3);
            assert!(parsed.results.iter().all(|r| !r.modified));
        }
        let extra = format!("{{\"0\": {e}, \"1\": {e}, \"2\": {e}, \"7\": {e}}}");
        assert_eq!(parse_response(&extra, &batch), Err(RelabelError::ExtraIndex(vec!["7".into()])));
        assert!(matches!(parse_response("not json", &batch), Err(RelabelError::Malformed(_))));
    }

    #[test]
    fn missing_index_named() {
        let batch: Vec<_> = (0..30).map(|i| item(i, "w", &NEUTRAL)).collect();
        let e = entry_json(&NEUTRAL, "r");
        let body: Vec<String> = (0..30).filter(|&i| i != 17).map(|i| format!("\"{i}\": {e}")).collect();
        let raw = format!("{{{}}}", body.join(","));
        assert_eq!(parse_response(&raw, &batch), Err(RelabelError::MissingIndex(vec![17])));
    }

    #[test]
    fn cost() {
        let cfg = ClientConfig::default();
        assert!((estimate_cost(35_352, &cfg) - 159.084).abs() < 1e-9);
        assert_eq!(estimate_cost(0, &cfg), 0.0);
        assert!((estimate_cost(1000, &cfg) - 4.5).abs() < 1e-12);
    }

    #[test]
    fn merge_counts_modified() {
        let labels: Vec<LabelRecord> = (0..8)
            .map(|i| LabelRecord {
                utterance_id: format!("u{i}"),
                kind: LabelKind::Distribution(NEUTRAL.to_vec()),
                smoothed: false,
            })
            .collect();
        let happy = [0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.0, 0.7];
        let results: Vec<RelabelResult> = (0..8)
            .map(|i| {
                let mut r = RelabelResult::unchanged(&item(i, "w", &NEUTRAL));
                if i < 7 {
                    r.adjusted = happy.to_vec();
                    r.modified = true;
                }
                r
            })
            .collect();
        let (merged, stats) = merge(&results, &labels).unwrap();
        assert_eq!(stats.modified, 7);
        assert_eq!(stats.modified_fraction, 0.875);
        assert_eq!(merged[0].kind, LabelKind::Distribution(happy.to_vec()));
        assert_eq!(merged[7], labels[7]);
        let (again, _) = merge(&results, &merged).unwrap();
        assert_eq!(again, merged);
        let mut stray = results[0].clone();
        stray.utterance_id = "nope".into();
        assert_eq!(merge(&[stray], &labels), Err(RelabelError::UnknownUtterance("nope".into())));
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(
            texts in proptest::collection::vec("[a-zA-Z ,#|\\\\]{0,12}", 1..=30),
            raw in proptest::collection::vec(0.0f64..1.0, 8),
        ) {
            let s: f64 = raw.iter().sum::<f64>() + 1e-9;
            let reference: Vec<f64> = raw.iter().map(|v| v / s).collect();
            prop_assume!((reference.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            let items: Vec<_> = texts.iter().enumerate().map(|(i, t)| item(i, t, &reference)).collect();
            let decoded = decode_batch(&encode_batch(&items).unwrap()).unwrap();
            prop_assert_eq!(decoded.len(), items.len());
            for ((text, values), it) in decoded.iter().zip(&items) {
                prop_assert_eq!(text, &it.descriptions);
                prop_assert_eq!(values, &it.reference);
            }
        }

        #[test]
        fn parsed_distributions_are_normalized(
            raw in proptest::collection::vec(0.0f64..1.0, 8),
            drift in -0.0099f64..0.0099,
        ) {
            let s: f64 = raw.iter().sum();
            prop_assume!(s > 0.1);
            let mut d = [0.0; 8];
            for (o, v) in d.iter_mut().zip(&raw) {
                *o = v / s * (1.0 + drift);
            }
            let parsed = parse_response(&entry_json(&d, "r"), &[item(0, "w", &NEUTRAL)]).unwrap();
            let r = &parsed.results[0];
            prop_assert!((r.adjusted.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
            prop_assert_eq!(argmax(&r.adjusted), argmax(&d));
        }
    }
}
