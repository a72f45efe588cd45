//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::head::HeadParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    cfg: AdamWConfig,
    m: HeadParams,
    v: HeadParams,
    step: i32,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig, like: &HeadParams) -> Self {
        AdamW {
            cfg,
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: &mut HeadParams, grad: &HeadParams) {
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        let ps = params.slices_mut();
        let gs = grad.slices();
        let ms = self.m.slices_mut();
        let vs = self.v.slices_mut();
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
            for i in 0..p.len() {
                p[i] -= c.lr * c.weight_decay * p[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_step_moves_by_lr() {
        // after bias correction the first update is lr * sign(g) (up to eps)
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = HeadParams::init(2, 2, 3, 2, &mut rng);
        let before = p.clone();
        let mut g = p.zeros_like();
        g.b2[0] = 3.0;
        g.b2[1] = -0.5;
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        };
        let mut opt = AdamW::new(cfg, &p);
        opt.step(&mut p, &g);
        assert!((before.b2[0] - p.b2[0] - 1e-4).abs() < 1e-10);
        assert!((p.b2[1] - before.b2[1] - 1e-4).abs() < 1e-10);
        assert_eq!(p.w1, before.w1);
    }

    #[test]
    fn decay_shrinks_without_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = HeadParams::init(2, 2, 3, 2, &mut rng);
        let before = p.clone();
        let g = p.zeros_like();
        let mut opt = AdamW::new(AdamWConfig { lr: 0.1, ..AdamWConfig::default() }, &p);
        opt.step(&mut p, &g);
        for (a, b) in p.w1.iter().zip(before.w1.iter()) {
            assert!((a - b * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = HeadParams::init(2, 2, 3, 2, &mut rng);
        let before = p.clone();
        let mut g = p.zeros_like();
        g.w1.fill(1.0);
        let mut opt = AdamW::new(AdamWConfig { lr: 0.0, ..AdamWConfig::default() }, &p);
        opt.step(&mut p, &g);
        assert_eq!(p, before);
    }
}
