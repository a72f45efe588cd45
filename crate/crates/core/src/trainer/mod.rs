//! Small downstream head trained with class-balanced cross-entropy on
//! frozen layer-stacked features.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aggregation::LabelRecord;
use crate::corpus::EmotionTaxonomy;
use crate::evaluation::binarize;

pub mod features;
pub mod head;
pub mod loss;
pub mod optim;
pub mod synthetic;

pub use features::{aggregate_features, load_feature_dir, write_feature_file, FeatureStack, LayerWeights};
pub use head::HeadParams;
pub use loss::{cbce_factors, cbce_loss};
pub use optim::{AdamW, AdamWConfig};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value")]
    NonFinite,
    #[error("beta must lie in (0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("class {0} has no positive training samples; its class-balanced weight is undefined")]
    EmptyClass(usize),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("utterance {0:?} has a dropped label")]
    DroppedLabel(String),
    #[error("utterance {0:?} has no features")]
    MissingFeatures(String),
    #[error("duplicate utterance {0:?}")]
    DuplicateUtterance(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("checkpoints disagree on layer count ({0} vs {1})")]
    MixedLayers(usize, usize),
    #[error("no checkpoints")]
    NoCheckpoints,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub beta: f64,
    pub optimizer: AdamWConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 256,
            batch_size: 32,
            max_epochs: 100,
            beta: 0.9999,
            optimizer: AdamWConfig::default(),
            seed: 7,
        }
    }
}

impl TrainConfig {
    /// Hex sha256 of the config's JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// One training example with the temporal means precomputed.
#[derive(Debug, Clone)]
pub struct Example {
    pub utterance_id: String,
    pub means: Array2<f64>,
    pub target: Vec<f64>,
}

impl Example {
    pub fn new(stack: &FeatureStack, label: &LabelRecord, taxonomy: &EmotionTaxonomy) -> Result<Self, TrainError> {
        let target = label
            .target(taxonomy)
            .ok_or_else(|| TrainError::DroppedLabel(label.utterance_id.clone()))?;
        if target.len() != taxonomy.len() {
            return Err(TrainError::Shape(format!(
                "{}: label has {} classes, taxonomy {}",
                label.utterance_id,
                target.len(),
                taxonomy.len()
            )));
        }
        Ok(Example {
            utterance_id: stack.utterance_id().to_string(),
            means: stack.layer_means(),
            target,
        })
    }
}

/// Pairs each non-dropped label with its feature stack.
pub fn build_examples(
    stacks: &[FeatureStack],
    labels: &[LabelRecord],
    taxonomy: &EmotionTaxonomy,
) -> Result<Vec<Example>, TrainError> {
    let by_id: std::collections::HashMap<&str, &FeatureStack> =
        stacks.iter().map(|s| (s.utterance_id(), s)).collect();
    labels
        .iter()
        .filter(|l| !l.is_dropped())
        .map(|l| {
            let stack = by_id
                .get(l.utterance_id.as_str())
                .ok_or_else(|| TrainError::MissingFeatures(l.utterance_id.clone()))?;
            Example::new(stack, l, taxonomy)
        })
        .collect()
}

/// Positive counts per class: an example is positive for class `j` when its
/// binarized target has bit `j` set.
pub fn class_counts(examples: &[Example], classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; classes];
    for ex in examples {
        for (j, &bit) in binarize(&ex.target).bits().iter().enumerate() {
            if bit {
                counts[j] += 1;
            }
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the minibatch losses seen during the epoch.
    pub train_loss: f64,
    pub dev_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest dev loss.
    pub params: HeadParams,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub history: Vec<EpochStats>,
    pub class_counts: Vec<u64>,
    pub factors: Vec<f64>,
}

pub fn mean_loss(params: &HeadParams, examples: &[Example], factors: &[f64]) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for ex in examples {
        total += params.loss(&ex.means, &ex.target, factors)?;
    }
    Ok(total / examples.len() as f64)
}

/// Softmax outputs for each example, in order.
pub fn predict_examples(params: &HeadParams, examples: &[Example]) -> Result<Vec<Vec<f64>>, TrainError> {
    examples
        .iter()
        .map(|ex| Ok(loss::softmax(&params.logits(&ex.means)?)))
        .collect()
}

pub fn train(train_set: &[Example], dev_set: &[Example], config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    let first = train_set.first().ok_or(TrainError::EmptySplit("train"))?;
    if dev_set.is_empty() {
        return Err(TrainError::EmptySplit("dev"));
    }
    if config.batch_size == 0 || config.hidden == 0 {
        return Err(TrainError::Config("batch size and hidden width must be positive".into()));
    }
    let (layers, dim) = first.means.dim();
    let classes = first.target.len();
    for ex in train_set.iter().chain(dev_set) {
        if ex.means.dim() != (layers, dim) || ex.target.len() != classes {
            return Err(TrainError::Shape(format!("{} does not match the first example", ex.utterance_id)));
        }
    }
    let counts = class_counts(train_set, classes);
    let factors = cbce_factors(config.beta, &counts)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = HeadParams::init(layers, dim, config.hidden, classes, &mut rng);
    let mut opt = AdamW::new(config.optimizer, &params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_dev_loss = f64::INFINITY;
    let mut history = Vec::with_capacity(config.max_epochs);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = 0.0;
        let mut n_batches = 0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = params.zeros_like();
            let mut batch_loss = 0.0;
            for &i in batch {
                let ex = &train_set[i];
                let (l, g) = params.loss_and_grad(&ex.means, &ex.target, &factors)?;
                batch_loss += l;
                for (acc, gs) in grad.slices_mut().into_iter().zip(g.slices()) {
                    for (a, v) in acc.iter_mut().zip(gs) {
                        *a += v;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for acc in grad.slices_mut() {
                acc.iter_mut().for_each(|a| *a *= scale);
            }
            opt.step(&mut params, &grad);
            if !params.is_finite() {
                return Err(TrainError::NonFinite);
            }
            batch_losses += batch_loss * scale;
            n_batches += 1;
        }
        let dev_loss = mean_loss(&params, dev_set, &factors)?;
        history.push(EpochStats {
            epoch,
            train_loss: batch_losses / n_batches as f64,
            dev_loss,
        });
        log::debug!("epoch {epoch}: dev loss {dev_loss:.6}");
        if dev_loss < best_dev_loss {
            best_dev_loss = dev_loss;
            best_epoch = epoch;
            best = params.clone();
        }
    }

    Ok(TrainOutcome {
        params: best,
        best_epoch,
        best_dev_loss,
        history,
        class_counts: counts,
        factors,
    })
}

/// Softmax layer weights per checkpoint, averaged layer by layer.
pub fn layer_weight_report(checkpoints: &[HeadParams]) -> Result<Vec<f64>, TrainError> {
    let first = checkpoints.first().ok_or(TrainError::NoCheckpoints)?;
    let l = first.n_layers();
    let mut acc = vec![0.0; l];
    for ck in checkpoints {
        if ck.n_layers() != l {
            return Err(TrainError::MixedLayers(l, ck.n_layers()));
        }
        for (a, w) in acc.iter_mut().zip(ck.layer_weights().normalized()) {
            *a += w;
        }
    }
    let n = checkpoints.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Serialized best parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_hash: String,
    pub config: TrainConfig,
    pub classes: Vec<String>,
    pub best_epoch: usize,
    pub best_dev_loss: f64,
    pub history: Vec<EpochStats>,
    pub layer_logits: Vec<f64>,
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(name: &str, rows: &[Vec<f64>], ncols: usize) -> Result<Array2<f64>, TrainError> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(TrainError::Shape(format!("{name}: ragged rows")));
    }
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| TrainError::Shape(format!("{name}: {e}")))
}

impl Checkpoint {
    pub fn new(outcome: &TrainOutcome, config: &TrainConfig, taxonomy: &EmotionTaxonomy) -> Self {
        let p = &outcome.params;
        Checkpoint {
            config_hash: config.hash(),
            config: *config,
            classes: taxonomy.classes().to_vec(),
            best_epoch: outcome.best_epoch,
            best_dev_loss: outcome.best_dev_loss,
            history: outcome.history.clone(),
            layer_logits: p.layer_logits.to_vec(),
            w1: rows(&p.w1),
            b1: p.b1.to_vec(),
            w2: rows(&p.w2),
            b2: p.b2.to_vec(),
        }
    }

    pub fn params(&self) -> Result<HeadParams, TrainError> {
        let hidden = self.b1.len();
        let classes = self.b2.len();
        let params = HeadParams {
            layer_logits: Array1::from(self.layer_logits.clone()),
            w1: from_rows("w1", &self.w1, hidden)?,
            b1: Array1::from(self.b1.clone()),
            w2: from_rows("w2", &self.w2, classes)?,
            b2: Array1::from(self.b2.clone()),
        };
        if params.w2.nrows() != hidden || self.classes.len() != classes || self.layer_logits.is_empty() {
            return Err(TrainError::Shape("checkpoint tensors are inconsistent".into()));
        }
        if !params.is_finite() {
            return Err(TrainError::NonFinite);
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let ck: Checkpoint = serde_json::from_slice(&std::fs::read(path)?)?;
        ck.params()?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::synthetic::{generate, SyntheticConfig};
    use super::*;
    use crate::evaluation::macro_f1;
    use proptest::prelude::*;

    fn split(cfg: &SyntheticConfig) -> (EmotionTaxonomy, Vec<Example>, Vec<Example>) {
        let data = generate(cfg).unwrap();
        let examples: Vec<Example> = data
            .samples
            .iter()
            .map(|(s, l)| Example::new(s, l, &data.taxonomy).unwrap())
            .collect();
        let cut = examples.len() * 4 / 5;
        let dev = examples[cut..].to_vec();
        let mut train_set = examples;
        train_set.truncate(cut);
        (data.taxonomy, train_set, dev)
    }

    fn small() -> (Vec<Example>, Vec<Example>, TrainConfig) {
        let (_, tr, dv) = split(&SyntheticConfig {
            per_class: 20,
            dim: 4,
            ..SyntheticConfig::default()
        });
        let cfg = TrainConfig {
            hidden: 16,
            max_epochs: 3,
            ..TrainConfig::default()
        };
        (tr, dv, cfg)
    }

    #[test]
    fn zero_lr_keeps_init() {
        let (tr, dv, mut cfg) = small();
        cfg.optimizer.lr = 0.0;
        let out = train(&tr, &dv, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let init = HeadParams::init(3, 4, 16, 2, &mut rng);
        assert_eq!(out.params, init);
        assert!(out.history.windows(2).all(|w| w[0].dev_loss == w[1].dev_loss));
    }

    #[test]
    fn same_seed_same_curve() {
        let (tr, dv, cfg) = small();
        let a = train(&tr, &dv, &cfg).unwrap();
        let b = train(&tr, &dv, &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        let c = train(&tr, &dv, &TrainConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.history, c.history);
    }

    #[test]
    fn best_epoch_has_lowest_dev_loss() {
        let (tr, dv, cfg) = small();
        let out = train(&tr, &dv, &cfg).unwrap();
        let min = out.history.iter().map(|h| h.dev_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_dev_loss, min);
        assert_eq!(out.history[out.best_epoch - 1].dev_loss, min);
        assert_eq!(mean_loss(&out.params, &dv, &out.factors).unwrap(), min);
    }

    #[test]
    fn empty_splits_rejected() {
        let (tr, dv, cfg) = small();
        assert!(matches!(train(&[], &dv, &cfg), Err(TrainError::EmptySplit("train"))));
        assert!(matches!(train(&tr, &[], &cfg), Err(TrainError::EmptySplit("dev"))));
    }

    #[test]
    fn learns_separable_clusters() {
        let (_, tr, dv) = split(&SyntheticConfig::default());
        let out = train(&tr, &dv, &TrainConfig { max_epochs: 30, ..TrainConfig::default() }).unwrap();
        let preds: Vec<_> = predict_examples(&out.params, &dv).unwrap().iter().map(|p| binarize(p)).collect();
        let golds: Vec<_> = dv.iter().map(|e| binarize(&e.target)).collect();
        assert!(macro_f1(&preds, &golds).unwrap().macro_f1 >= 0.95);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (tr, dv, cfg) = small();
        let out = train(&tr, &dv, &cfg).unwrap();
        let tax = EmotionTaxonomy::new("t", vec!["a".into(), "b".into()]).unwrap();
        let ck = Checkpoint::new(&out, &cfg, &tax);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded, ck);
        assert_eq!(loaded.params().unwrap(), out.params);
        assert_eq!(loaded.config_hash, cfg.hash());
    }

    fn with_logits(logits: &[f64]) -> HeadParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = HeadParams::init(logits.len(), 1, 1, 2, &mut rng);
        p.layer_logits = Array1::from(logits.to_vec());
        p
    }

    #[test]
    fn layer_report_cases() {
        let one = with_logits(&[0.5, -1.0, 2.0]);
        assert_eq!(layer_weight_report(std::slice::from_ref(&one)).unwrap(), one.layer_weights().normalized().to_vec());
        let mirrored = layer_weight_report(&[with_logits(&[1.0, -1.0]), with_logits(&[-1.0, 1.0])]).unwrap();
        assert!((mirrored[0] - 0.5).abs() < 1e-15 && (mirrored[1] - 0.5).abs() < 1e-15);
        assert!(matches!(
            layer_weight_report(&[with_logits(&[0.0]), with_logits(&[0.0, 0.0])]),
            Err(TrainError::MixedLayers(1, 2))
        ));
        assert!(matches!(layer_weight_report(&[]), Err(TrainError::NoCheckpoints)));
    }

    proptest! {
        #[test]
        fn layer_report_matches_naive(raw in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..6)) {
            let cks: Vec<HeadParams> = raw.iter().map(|l| with_logits(l)).collect();
            let got = layer_weight_report(&cks).unwrap();
            for l in 0..4 {
                let mut acc = 0.0;
                for logits in &raw {
                    let z: f64 = logits.iter().map(|v| v.exp()).sum();
                    acc += logits[l].exp() / z;
                }
                prop_assert!((got[l] - acc / raw.len() as f64).abs() < 1e-12);
            }
            prop_assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
