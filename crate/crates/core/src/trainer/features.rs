//! Layer-stacked features, layer weighting and the on-disk feature format.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use super::loss::softmax;
use super::TrainError;

/// `L x T x D` hidden states for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    utterance_id: String,
    layers: Array3<f64>,
}

impl FeatureStack {
    pub fn new(utterance_id: impl Into<String>, layers: Array3<f64>) -> Result<Self, TrainError> {
        let (l, t, d) = layers.dim();
        if l == 0 || t == 0 || d == 0 {
            return Err(TrainError::Shape(format!("empty feature stack {l}x{t}x{d}")));
        }
        if layers.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite);
        }
        Ok(FeatureStack {
            utterance_id: utterance_id.into(),
            layers,
        })
    }

    pub fn utterance_id(&self) -> &str {
        &self.utterance_id
    }

    pub fn layers(&self) -> &Array3<f64> {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.dim().0
    }

    pub fn n_frames(&self) -> usize {
        self.layers.dim().1
    }

    pub fn dim(&self) -> usize {
        self.layers.dim().2
    }

    /// Per-layer temporal means, `L x D`.
    pub fn layer_means(&self) -> Array2<f64> {
        self.layers.mean_axis(Axis(1)).expect("T >= 1")
    }
}

/// Unnormalized layer logits and their softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    logits: Vec<f64>,
    normalized: Vec<f64>,
}

impl LayerWeights {
    pub fn from_logits(logits: Vec<f64>) -> Result<Self, TrainError> {
        if logits.is_empty() {
            return Err(TrainError::Shape("no layer logits".into()));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite);
        }
        let normalized = softmax(&logits);
        Ok(LayerWeights { logits, normalized })
    }

    pub fn uniform(layers: usize) -> Result<Self, TrainError> {
        Self::from_logits(vec![0.0; layers])
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }
}

/// Mean over frames of the layer-weighted sum.
pub fn aggregate_features(stack: &FeatureStack, w: &LayerWeights) -> Result<Array1<f64>, TrainError> {
    if w.normalized.len() != stack.n_layers() {
        return Err(TrainError::Shape(format!(
            "{} layer weights for {} layers",
            w.normalized.len(),
            stack.n_layers()
        )));
    }
    Ok(Array1::from(w.normalized.clone()).dot(&stack.layer_means()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    utterance_id: String,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "D")]
    d: usize,
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Writes `<stem>.bin` (little-endian f32) and `<stem>.json`. Returns the
/// path of the binary file.
pub fn write_feature_file(dir: &Path, stack: &FeatureStack) -> Result<PathBuf, TrainError> {
    fs::create_dir_all(dir)?;
    let stem = file_stem(&stack.utterance_id);
    let bin = dir.join(format!("{stem}.bin"));
    let mut bytes = Vec::with_capacity(stack.layers.len() * 4);
    for v in stack.layers.iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::File::create(&bin)?.write_all(&bytes)?;
    let (l, t, d) = stack.layers.dim();
    let sidecar = Sidecar {
        utterance_id: stack.utterance_id.clone(),
        l,
        t,
        d,
    };
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_vec(&sidecar)?)?;
    Ok(bin)
}

/// Reads one feature file given the path of its JSON sidecar.
pub fn read_feature_file(sidecar_path: &Path) -> Result<FeatureStack, TrainError> {
    let sidecar: Sidecar = serde_json::from_slice(&fs::read(sidecar_path)?)?;
    let bin = sidecar_path.with_extension("bin");
    let mut bytes = Vec::new();
    fs::File::open(&bin)?.read_to_end(&mut bytes)?;
    let n = sidecar.l * sidecar.t * sidecar.d;
    if bytes.len() != n * 4 {
        return Err(TrainError::Shape(format!(
            "{}: expected {} bytes for {}x{}x{}, found {}",
            bin.display(),
            n * 4,
            sidecar.l,
            sidecar.t,
            sidecar.d,
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let layers = Array3::from_shape_vec((sidecar.l, sidecar.t, sidecar.d), values)
        .map_err(|e| TrainError::Shape(e.to_string()))?;
    FeatureStack::new(sidecar.utterance_id, layers)
}

/// Loads every `*.json` sidecar in `dir`, sorted by utterance id.
pub fn load_feature_dir(dir: &Path) -> Result<Vec<FeatureStack>, TrainError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(read_feature_file(&path)?);
        }
    }
    out.sort_by(|a, b| a.utterance_id.cmp(&b.utterance_id));
    for pair in out.windows(2) {
        if pair[0].utterance_id == pair[1].utterance_id {
            return Err(TrainError::DuplicateUtterance(pair[0].utterance_id.clone()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;
    use proptest::prelude::*;

    fn stack_from(l: usize, t: usize, d: usize, f: impl Fn(usize, usize, usize) -> f64) -> FeatureStack {
        FeatureStack::new("u", Array::from_shape_fn((l, t, d), |(a, b, c)| f(a, b, c))).unwrap()
    }

    #[test]
    fn single_layer_is_temporal_mean() {
        let s = stack_from(1, 3, 2, |_, t, d| (t * 10 + d) as f64);
        let v = aggregate_features(&s, &LayerWeights::uniform(1).unwrap()).unwrap();
        assert_eq!(v.to_vec(), vec![10.0, 11.0]);
    }

    #[test]
    fn identical_layers_fixed_point() {
        let s = stack_from(2, 4, 3, |_, t, d| (t as f64).sin() + d as f64);
        let v = aggregate_features(&s, &LayerWeights::uniform(2).unwrap()).unwrap();
        let mean = s.layer_means().row(0).to_owned();
        for (a, b) in v.iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_errors() {
        let s = stack_from(2, 1, 1, |_, _, _| 0.0);
        assert!(aggregate_features(&s, &LayerWeights::uniform(3).unwrap()).is_err());
        assert!(FeatureStack::new("x", Array3::zeros((0, 1, 1))).is_err());
        assert!(FeatureStack::new("x", Array3::from_elem((1, 1, 1), f64::INFINITY)).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = FeatureStack::new(
            "Ses01F/impro 01",
            Array::from_shape_fn((2, 3, 4), |(a, b, c)| (a * 12 + b * 4 + c) as f64 * 0.5),
        )
        .unwrap();
        write_feature_file(dir.path(), &s).unwrap();
        let loaded = load_feature_dir(dir.path()).unwrap();
        assert_eq!(loaded, vec![s]);
    }

    proptest! {
        #[test]
        fn matches_triple_loop(
            l in 1usize..5, t in 1usize..6, d in 1usize..5,
            seed in proptest::collection::vec(-3.0f64..3.0, 200),
            logits in proptest::collection::vec(-2.0f64..2.0, 5),
        ) {
            let s = stack_from(l, t, d, |a, b, c| seed[(a * 37 + b * 7 + c) % 200]);
            let w = LayerWeights::from_logits(logits[..l].to_vec()).unwrap();
            let got = aggregate_features(&s, &w).unwrap();
            for c in 0..d {
                let mut acc = 0.0;
                for b in 0..t {
                    for a in 0..l {
                        acc += w.normalized()[a] * s.layers()[[a, b, c]];
                    }
                }
                acc /= t as f64;
                prop_assert!((got[c] - acc).abs() < 1e-12);
            }
        }

        #[test]
        fn inside_hull_of_layer_means(
            l in 1usize..5, d in 1usize..4,
            seed in proptest::collection::vec(-3.0f64..3.0, 64),
            logits in proptest::collection::vec(-4.0f64..4.0, 5),
        ) {
            let s = stack_from(l, 3, d, |a, b, c| seed[(a * 13 + b * 5 + c) % 64]);
            let w = LayerWeights::from_logits(logits[..l].to_vec()).unwrap();
            let got = aggregate_features(&s, &w).unwrap();
            let means = s.layer_means();
            for c in 0..d {
                let col = means.column(c);
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(got[c] >= lo - 1e-12 && got[c] <= hi + 1e-12);
            }
            let sum: f64 = w.normalized().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
