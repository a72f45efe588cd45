//! Gaussian class clusters per layer, for running the training loop without
//! a speech model.

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::FeatureStack;
use super::TrainError;
use crate::aggregation::{LabelKind, LabelRecord};
use crate::corpus::EmotionTaxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub layers: usize,
    pub frames: usize,
    pub dim: usize,
    pub per_class: usize,
    /// Scale of the class centroids.
    pub separation: f64,
    /// Per-frame noise standard deviation.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 2,
            layers: 3,
            frames: 8,
            dim: 16,
            per_class: 100,
            separation: 1.0,
            noise: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub taxonomy: EmotionTaxonomy,
    pub samples: Vec<(FeatureStack, LabelRecord)>,
}

/// Classes are interleaved so any contiguous slice is roughly balanced.
/// Labels are one-hot distributions.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticData, TrainError> {
    if cfg.classes < 2 || cfg.layers == 0 || cfg.frames == 0 || cfg.dim == 0 {
        return Err(TrainError::Shape(format!("bad synthetic config {cfg:?}")));
    }
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| TrainError::Shape(e.to_string()))?;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let centroids: Vec<Array2<f64>> = (0..cfg.classes)
        .map(|_| Array2::from_shape_simple_fn((cfg.layers, cfg.dim), || cfg.separation * unit.sample(&mut rng)))
        .collect();
    let taxonomy = EmotionTaxonomy::new(
        "synthetic",
        (0..cfg.classes).map(|c| format!("class{c}")).collect(),
    )
    .map_err(|e| TrainError::Shape(e.to_string()))?;

    let mut samples = Vec::with_capacity(cfg.classes * cfg.per_class);
    for i in 0..cfg.per_class {
        for (class, centroid) in centroids.iter().enumerate() {
            let layers = Array3::from_shape_fn((cfg.layers, cfg.frames, cfg.dim), |(l, _, d)| centroid[[l, d]])
                + Array3::from_shape_simple_fn((cfg.layers, cfg.frames, cfg.dim), || noise.sample(&mut rng));
            let id = format!("syn-{:05}", i * cfg.classes + class);
            let mut target = vec![0.0; cfg.classes];
            target[class] = 1.0;
            samples.push((
                FeatureStack::new(id.clone(), layers)?,
                LabelRecord {
                    utterance_id: id,
                    kind: LabelKind::Distribution(target),
                    smoothed: false,
                },
            ));
        }
    }
    Ok(SyntheticData { taxonomy, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let cfg = SyntheticConfig {
            per_class: 5,
            ..SyntheticConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.samples.len(), 10);
        assert_eq!(a.samples[3].0, b.samples[3].0);
        assert_eq!(a.samples[0].0.layers().dim(), (3, 8, 16));
        assert_eq!(a.samples[1].1.target(&a.taxonomy).unwrap(), vec![0.0, 1.0]);
    }
}
