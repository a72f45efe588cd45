//! Layer-weighted pooling followed by `dense(hidden) -> ReLU -> dense(C)`.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::features::{FeatureStack, LayerWeights};
use super::loss::{cbce_loss, softmax};
use super::TrainError;

/// Trainable parameters. Gradients use the same container.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub layer_logits: Array1<f64>,
    /// `D x hidden`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `hidden x C`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

/// Intermediate values of one forward pass.
struct Forward {
    weights: Vec<f64>,
    x: Array1<f64>,
    z1: Array1<f64>,
    h: Array1<f64>,
    logits: Array1<f64>,
}

impl HeadParams {
    /// Uniform layer weights; dense layers drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init<R: Rng>(layers: usize, dim: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
        };
        let w1 = uniform(dim, hidden, dim);
        let b1 = uniform(1, hidden, dim).remove_axis(Axis(0));
        let w2 = uniform(hidden, classes, hidden);
        let b2 = uniform(1, classes, hidden).remove_axis(Axis(0));
        HeadParams {
            layer_logits: Array1::zeros(layers),
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn zeros_like(&self) -> Self {
        HeadParams {
            layer_logits: Array1::zeros(self.layer_logits.raw_dim()),
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.layer_logits.len()
    }

    pub fn dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.b2.len()
    }

    pub fn layer_weights(&self) -> LayerWeights {
        LayerWeights::from_logits(self.layer_logits.to_vec()).expect("finite layer logits")
    }

    /// Parameter tensors in a fixed order: layer logits, w1, b1, w2, b2.
    pub fn slices(&self) -> [&[f64]; 5] {
        [
            self.layer_logits.as_slice().expect("contiguous"),
            self.w1.as_slice().expect("contiguous"),
            self.b1.as_slice().expect("contiguous"),
            self.w2.as_slice().expect("contiguous"),
            self.b2.as_slice().expect("contiguous"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.layer_logits.as_slice_mut().expect("contiguous"),
            self.w1.as_slice_mut().expect("contiguous"),
            self.b1.as_slice_mut().expect("contiguous"),
            self.w2.as_slice_mut().expect("contiguous"),
            self.b2.as_slice_mut().expect("contiguous"),
        ]
    }

    pub fn n_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, means: &Array2<f64>) -> Result<(), TrainError> {
        if means.dim() != (self.n_layers(), self.dim()) {
            return Err(TrainError::Shape(format!(
                "features are {}x{}, head expects {}x{}",
                means.nrows(),
                means.ncols(),
                self.n_layers(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn forward(&self, means: &Array2<f64>) -> Forward {
        let weights = softmax(self.layer_logits.as_slice().expect("contiguous"));
        let x = Array1::from(weights.clone()).dot(means);
        let z1 = x.dot(&self.w1) + &self.b1;
        let h = z1.mapv(|v| v.max(0.0));
        let logits = h.dot(&self.w2) + &self.b2;
        Forward {
            weights,
            x,
            z1,
            h,
            logits,
        }
    }

    /// Output logits for per-layer temporal means (`L x D`).
    pub fn logits(&self, means: &Array2<f64>) -> Result<Vec<f64>, TrainError> {
        self.check_input(means)?;
        Ok(self.forward(means).logits.to_vec())
    }

    /// Class distribution for one utterance.
    pub fn predict(&self, stack: &FeatureStack) -> Result<Vec<f64>, TrainError> {
        Ok(softmax(&self.logits(&stack.layer_means())?))
    }

    pub fn loss(&self, means: &Array2<f64>, target: &[f64], factors: &[f64]) -> Result<f64, TrainError> {
        Ok(cbce_loss(&self.logits(means)?, target, factors)?.0)
    }

    /// Loss and gradients with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        means: &Array2<f64>,
        target: &[f64],
        factors: &[f64],
    ) -> Result<(f64, HeadParams), TrainError> {
        self.check_input(means)?;
        let fw = self.forward(means);
        let (loss, g_logits) = cbce_loss(fw.logits.as_slice().expect("contiguous"), target, factors)?;
        let g_logits = Array1::from(g_logits);

        let w2 = outer(&fw.h, &g_logits);
        let g_h = self.w2.dot(&g_logits);
        let g_z1 = Array1::from_shape_fn(g_h.len(), |i| if fw.z1[i] > 0.0 { g_h[i] } else { 0.0 });
        let w1 = outer(&fw.x, &g_z1);
        let g_x = self.w1.dot(&g_z1);

        // softmax Jacobian: dL/da_k = w_k (g_k - sum_l w_l g_l), g_l = m_l . g_x
        let g_w = means.dot(&g_x);
        let mean_g: f64 = fw.weights.iter().zip(g_w.iter()).map(|(w, g)| w * g).sum();
        let layer_logits = Array1::from_shape_fn(fw.weights.len(), |k| fw.weights[k] * (g_w[k] - mean_g));

        Ok((
            loss,
            HeadParams {
                layer_logits,
                w1,
                b1: g_z1,
                w2,
                b2: g_logits,
            },
        ))
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}
