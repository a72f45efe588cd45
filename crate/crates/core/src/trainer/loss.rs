//! Class-balanced cross-entropy.

use super::TrainError;

/// Per-class weights `(1 - beta) / (1 - beta^n_j)`.
///
/// `beta == 1` takes the limit `1 / n_j`. Classes with `n_j == 0` have no
/// defined weight.
pub fn cbce_factors(beta: f64, counts: &[u64]) -> Result<Vec<f64>, TrainError> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(TrainError::InvalidBeta(beta));
    }
    counts
        .iter()
        .enumerate()
        .map(|(class, &n)| match n {
            0 => Err(TrainError::EmptyClass(class)),
            1 => Ok(1.0),
            _ if beta == 1.0 => Ok(1.0 / n as f64),
            _ => {
                // 1 - beta^n without cancellation near beta = 1
                let denom = -((n as f64) * (beta - 1.0).ln_1p()).exp_m1();
                Ok((1.0 - beta) / denom)
            }
        })
        .collect()
}

/// `log softmax` with the max shift.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// `sum_j factor_j * (-target_j * log softmax(logits)_j)` and its gradient
/// with respect to the logits.
pub fn cbce_loss(logits: &[f64], target: &[f64], factors: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
    let c = logits.len();
    if target.len() != c || factors.len() != c {
        return Err(TrainError::Shape(format!(
            "logits {c}, target {}, factors {}",
            target.len(),
            factors.len()
        )));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(TrainError::NonFinite);
    }
    let logp = log_softmax(logits);
    let mut loss = 0.0;
    let mut weight = 0.0;
    for j in 0..c {
        let ft = factors[j] * target[j];
        loss -= ft * logp[j];
        weight += ft;
    }
    // d/dz_k = p_k * sum_j f_j t_j - f_k t_k
    let grad = (0..c)
        .map(|k| logp[k].exp() * weight - factors[k] * target[k])
        .collect();
    Ok((loss, grad))
}
