//! Threshold binarization and macro-F1.
//!
//! A class counts as present when its share of the distribution strictly
//! exceeds `1/C`. Per-class precision, recall and F1 come from one-vs-rest
//! confusion counts; any zero denominator yields 0.

use serde::{Deserialize, Serialize};

use crate::corpus::EmotionTaxonomy;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("{preds} predictions but {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("sample {index}: prediction has {pred} classes, gold has {gold}")]
    ClassMismatch { index: usize, pred: usize, gold: usize },
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("need at least two paired values, got {0}")]
    TooFewValues(usize),
    #[error("concordance is undefined: both series are constant with equal means")]
    DegenerateCcc,
    #[error("no fold results to combine")]
    NoFolds,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiHot(Vec<bool>);

impl MultiHot {
    pub fn new(bits: Vec<bool>) -> Self {
        MultiHot(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }
}

impl From<&[u8]> for MultiHot {
    fn from(v: &[u8]) -> Self {
        MultiHot(v.iter().map(|&b| b != 0).collect())
    }
}

/// `bit_c = dist_c > 1/C`.
pub fn binarize(dist: &[f64]) -> MultiHot {
    let threshold = 1.0 / dist.len() as f64;
    MultiHot(dist.iter().map(|&p| p > threshold).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

/// One-vs-rest confusion counts for every class. Counts from disjoint shards
/// merge exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_class: Vec<ClassCounts>,
    pub n_samples: usize,
}

impl ConfusionCounts {
    pub fn empty(classes: usize) -> Self {
        ConfusionCounts {
            per_class: vec![ClassCounts::default(); classes],
            n_samples: 0,
        }
    }

    pub fn add(&mut self, pred: &MultiHot, gold: &MultiHot) {
        for (c, (&p, &g)) in self.per_class.iter_mut().zip(pred.0.iter().zip(&gold.0)) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        self.n_samples += 1;
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (a, b) in self.per_class.iter_mut().zip(&other.per_class) {
            a.tp += b.tp;
            a.fp += b.fp;
            a.fn_ += b.fn_;
            a.tn += b.tn;
        }
        self.n_samples += other.n_samples;
    }
}

pub fn confusion(preds: &[MultiHot], golds: &[MultiHot]) -> Result<ConfusionCounts, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    let classes = golds.first().or(preds.first()).map_or(0, MultiHot::len);
    let mut counts = ConfusionCounts::empty(classes);
    for (i, (p, g)) in preds.iter().zip(golds).enumerate() {
        if p.len() != classes || g.len() != classes {
            return Err(EvalError::ClassMismatch {
                index: i,
                pred: p.len(),
                gold: g.len(),
            });
        }
        counts.add(p, g);
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<&ClassCounts> for ClassScore {
    fn from(c: &ClassCounts) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassScore {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub macro_f1: f64,
    pub per_class: Vec<ClassScore>,
    pub n_samples: usize,
}

impl From<&ConfusionCounts> for EvalResult {
    fn from(c: &ConfusionCounts) -> Self {
        let per_class: Vec<ClassScore> = c.per_class.iter().map(ClassScore::from).collect();
        EvalResult {
            macro_f1: mean(per_class.iter().map(|s| s.f1)),
            per_class,
            n_samples: c.n_samples,
        }
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

pub fn macro_f1(preds: &[MultiHot], golds: &[MultiHot]) -> Result<EvalResult, EvalError> {
    confusion(preds, golds).map(|c| EvalResult::from(&c))
}

/// How fold-level results fold into one dataset score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldCombine {
    /// Unweighted mean of per-fold scores.
    #[default]
    Mean,
    /// One confusion table over all folds.
    Pooled,
}

impl std::str::FromStr for FoldCombine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(FoldCombine::Mean),
            "pooled" => Ok(FoldCombine::Pooled),
            other => Err(format!("unknown fold combination {other:?} (expected mean or pooled)")),
        }
    }
}

pub fn combine_folds(folds: &[ConfusionCounts], mode: FoldCombine) -> Result<EvalResult, EvalError> {
    let first = folds.first().ok_or(EvalError::NoFolds)?;
    match mode {
        FoldCombine::Pooled => {
            let mut all = ConfusionCounts::empty(first.per_class.len());
            for f in folds {
                all.merge(f);
            }
            Ok(EvalResult::from(&all))
        }
        FoldCombine::Mean => {
            let results: Vec<EvalResult> = folds.iter().map(EvalResult::from).collect();
            let classes = first.per_class.len();
            let per_class: Vec<ClassScore> = (0..classes)
                .map(|c| ClassScore {
                    precision: mean(results.iter().map(|r| r.per_class[c].precision)),
                    recall: mean(results.iter().map(|r| r.per_class[c].recall)),
                    f1: mean(results.iter().map(|r| r.per_class[c].f1)),
                })
                .collect();
            Ok(EvalResult {
                macro_f1: mean(per_class.iter().map(|s| s.f1)),
                per_class,
                n_samples: results.iter().map(|r| r.n_samples).sum(),
            })
        }
    }
}

/// Percentage change from `baseline` to `improved`.
pub fn relative_gain(baseline: f64, improved: f64) -> Result<f64, EvalError> {
    if !baseline.is_finite() || baseline <= 0.0 {
        return Err(EvalError::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (improved - baseline) / baseline)
}

/// Concordance correlation coefficient with population moments.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            preds: x.len(),
            golds: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(EvalError::TooFewValues(n));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        vx += dx * dx;
        vy += dy * dy;
        cov += dx * dy;
    }
    vx /= nf;
    vy /= nf;
    cov /= nf;
    let denom = vx + vy + (mx - my).powi(2);
    if denom == 0.0 {
        return Err(EvalError::DegenerateCcc);
    }
    Ok(2.0 * cov / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Evaluation report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub fold: Option<usize>,
    pub macro_f1: f64,
    pub per_class: Vec<ClassReport>,
    pub n_samples: usize,
}

impl EvalReport {
    pub fn new(dataset: &str, fold: Option<usize>, taxonomy: &EmotionTaxonomy, result: &EvalResult) -> Self {
        EvalReport {
            dataset: dataset.to_string(),
            fold,
            macro_f1: result.macro_f1,
            per_class: taxonomy
                .classes()
                .iter()
                .zip(&result.per_class)
                .map(|(class, s)| ClassReport {
                    class: class.clone(),
                    precision: s.precision,
                    recall: s.recall,
                    f1: s.f1,
                })
                .collect(),
            n_samples: result.n_samples,
        }
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let width = self.per_class.iter().map(|c| c.class.len()).max().unwrap_or(5).max(5);
        let mut out = format!(
            "{:<width$}  {:>9}  {:>9}  {:>9}\n",
            "class", "precision", "recall", "f1"
        );
        for c in &self.per_class {
            out.push_str(&format!(
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}\n",
                c.class, c.precision, c.recall, c.f1
            ));
        }
        out.push_str(&format!(
            "macro-F1 {:.4} over {} samples\n",
            self.macro_f1, self.n_samples
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mh(v: &[u8]) -> MultiHot {
        MultiHot::from(v)
    }

    #[test]
    fn binarize_worked_example() {
        assert_eq!(binarize(&[0.2, 0.4, 0.4, 0.0]), mh(&[0, 1, 1, 0]));
        assert_eq!(binarize(&[0.2, 0.35, 0.35, 0.1]), mh(&[0, 1, 1, 0]));
        assert_eq!(binarize(&[0.1, 0.45, 0.45, 0.0]), mh(&[0, 1, 1, 0]));
        assert_eq!(binarize(&[0.45, 0.1, 0.0, 0.45]), mh(&[1, 0, 0, 1]));
    }

    #[test]
    fn uniform_maps_to_zeros() {
        assert_eq!(binarize(&[0.25; 4]), mh(&[0, 0, 0, 0]));
    }

    #[test]
    fn identity_scores_one() {
        let g = vec![mh(&[0, 1, 1, 0]), mh(&[1, 0, 0, 1]), mh(&[1, 1, 1, 1])];
        assert_eq!(macro_f1(&g, &g).unwrap().macro_f1, 1.0);
    }

    #[test]
    fn hand_enumerated_case() {
        let golds = vec![mh(&[0, 1, 1, 0]), mh(&[1, 0, 0, 1])];
        let preds = vec![mh(&[0, 1, 1, 0]), mh(&[1, 0, 0, 0])];
        let r = macro_f1(&preds, &golds).unwrap();
        let f1: Vec<f64> = r.per_class.iter().map(|c| c.f1).collect();
        assert_eq!(f1, vec![1.0, 1.0, 1.0, 0.0]);
        assert_eq!(r.macro_f1, 0.75);
        assert_eq!(r.n_samples, 2);
    }

    #[test]
    fn zero_division_gives_zero() {
        let r = macro_f1(&[mh(&[0, 0])], &[mh(&[0, 0])]).unwrap();
        assert_eq!(r.macro_f1, 0.0);
        assert!(r.per_class.iter().all(|c| c.precision == 0.0 && c.recall == 0.0));
    }

    #[test]
    fn mismatches() {
        assert!(matches!(
            macro_f1(&[mh(&[1, 0])], &[]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            macro_f1(&[mh(&[1, 0]), mh(&[1, 0, 0])], &[mh(&[1, 0]), mh(&[1, 0])]),
            Err(EvalError::ClassMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn relative_gain_cases() {
        assert!((relative_gain(0.265, 0.290).unwrap() - 9.4339622641509).abs() < 1e-9);
        assert_eq!(relative_gain(0.4, 0.4).unwrap(), 0.0);
        assert_eq!(relative_gain(0.186, 0.186).unwrap(), 0.0);
        assert!(relative_gain(0.0, 0.1).is_err());
        assert!(relative_gain(-1.0, 0.1).is_err());
    }

    #[test]
    fn ccc_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((ccc(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let shifted: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        assert!(ccc(&x, &shifted).unwrap() < 1.0);
        assert_eq!(ccc(&[2.0, 2.0], &[2.0, 2.0]), Err(EvalError::DegenerateCcc));
        assert_eq!(ccc(&[1.0], &[1.0]), Err(EvalError::TooFewValues(1)));
        // constant but shifted means is defined: 0
        assert_eq!(ccc(&[1.0, 1.0], &[2.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn fold_combination() {
        let a = confusion(&[mh(&[1, 0])], &[mh(&[1, 0])]).unwrap();
        let b = confusion(&[mh(&[1, 0])], &[mh(&[0, 1])]).unwrap();
        let mean = combine_folds(&[a.clone(), b.clone()], FoldCombine::Mean).unwrap();
        assert_eq!(mean.macro_f1, 0.25);
        let pooled = combine_folds(&[a, b], FoldCombine::Pooled).unwrap();
        // class 0: tp1 fp1 -> p .5 r 1 f1 2/3 ; class 1: fn1 -> 0
        assert!((pooled.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pooled.n_samples, 2);
        assert_eq!(combine_folds(&[], FoldCombine::Mean), Err(EvalError::NoFolds));
    }

    fn arb_pairs() -> impl Strategy<Value = (Vec<MultiHot>, Vec<MultiHot>)> {
        (2usize..=8, 1usize..=30).prop_flat_map(|(c, n)| {
            let row = proptest::collection::vec(any::<bool>(), c).prop_map(MultiHot::new);
            (
                proptest::collection::vec(row.clone(), n),
                proptest::collection::vec(row, n),
            )
        })
    }

    proptest! {
        #[test]
        fn sample_order_invariance((p, g) in arb_pairs(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let base = macro_f1(&p, &g).unwrap().macro_f1;
            let mut idx: Vec<usize> = (0..p.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let p2: Vec<_> = idx.iter().map(|&i| p[i].clone()).collect();
            let g2: Vec<_> = idx.iter().map(|&i| g[i].clone()).collect();
            prop_assert_eq!(macro_f1(&p2, &g2).unwrap().macro_f1, base);
        }

        #[test]
        fn class_permutation_invariance((p, g) in arb_pairs(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let c = p[0].len();
            let mut perm: Vec<usize> = (0..c).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let apply = |v: &[MultiHot]| -> Vec<MultiHot> {
                v.iter().map(|m| MultiHot::new(perm.iter().map(|&k| m.bits()[k]).collect())).collect()
            };
            let a = macro_f1(&p, &g).unwrap().macro_f1;
            let b = macro_f1(&apply(&p), &apply(&g)).unwrap().macro_f1;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn argmax_above_threshold_is_set(raw in proptest::collection::vec(0.0f64..1.0, 2..9)) {
            let s: f64 = raw.iter().sum();
            prop_assume!(s > 0.0);
            let d: Vec<f64> = raw.iter().map(|x| x / s).collect();
            let (arg, &max) = d.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            if max > 1.0 / d.len() as f64 {
                prop_assert!(binarize(&d).bits()[arg]);
            }
        }
    }
}
