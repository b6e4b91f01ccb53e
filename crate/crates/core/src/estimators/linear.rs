//! Multinomial logistic regression trained by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::params::LinearConfig;
use super::EstimatorError;

/// Class weight rows, each `d` coefficients followed by a bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[usize],
        sample_weights: &[f64],
        classes: usize,
        cfg: &LinearConfig,
    ) -> Result<Self, EstimatorError> {
        let dim = x.first().map_or(0, Vec::len);
        let mut weights = vec![0.0; classes * (dim + 1)];
        for iteration in 0..cfg.iterations {
            let (loss, grad) = objective(&weights, classes, dim, x, y, sample_weights, cfg.l2);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(EstimatorError::NonFiniteLoss { iteration });
            }
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(EstimatorError::NonFiniteLoss { iteration: cfg.iterations });
        }
        Ok(Self { classes, dim, weights })
    }

    pub fn predict(&self, row: &[f64]) -> Vec<f64> {
        softmax(&logits(&self.weights, self.classes, self.dim, row))
    }
}

fn logits(weights: &[f64], classes: usize, dim: usize, row: &[f64]) -> Vec<f64> {
    (0..classes)
        .map(|k| {
            let w = &weights[k * (dim + 1)..(k + 1) * (dim + 1)];
            w[..dim].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + w[dim]
        })
        .collect()
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Weighted mean cross-entropy plus `l2/2·‖W‖²` (biases unpenalized), and
/// its analytic gradient with respect to the flattened weights.
pub fn objective(
    weights: &[f64],
    classes: usize,
    dim: usize,
    x: &[Vec<f64>],
    y: &[usize],
    sample_weights: &[f64],
    l2: f64,
) -> (f64, Vec<f64>) {
    let stride = dim + 1;
    let total_weight: f64 = sample_weights.iter().sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    for ((row, &label), &sw) in x.iter().zip(y).zip(sample_weights) {
        let z = logits(weights, classes, dim, row);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += sw * (log_norm - z[label]);
        for k in 0..classes {
            let p = (z[k] - log_norm).exp();
            let delta = sw * (p - if k == label { 1.0 } else { 0.0 });
            let g = &mut grad[k * stride..(k + 1) * stride];
            for (gj, xj) in g[..dim].iter_mut().zip(row) {
                *gj += delta * xj;
            }
            g[dim] += delta;
        }
    }
    loss /= total_weight;
    grad.iter_mut().for_each(|g| *g /= total_weight);
    for k in 0..classes {
        for j in 0..dim {
            let w = weights[k * stride + j];
            loss += 0.5 * l2 * w * w;
            grad[k * stride + j] += l2 * w;
        }
    }
    (loss, grad)
}
