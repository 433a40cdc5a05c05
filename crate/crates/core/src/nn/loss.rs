//! Per-class binary cross-entropy summed over classes.

use crate::label_space::MultiHot;

/// Lower clamp applied to every log argument.
pub const LOG_EPS: f64 = 1e-12;

/// `-sum_i [y_i ln p_i + (1 - y_i) ln(1 - p_i)]` for one sample.
pub fn multilabel_xent(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter()
        .zip(target)
        .map(|(&p, &y)| -(y * p.max(LOG_EPS).ln() + (1.0 - y) * (1.0 - p).max(LOG_EPS).ln()))
        .sum()
}

/// dL/dp of [`multilabel_xent`]; zero where a log argument is clamped.
pub fn multilabel_xent_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    pred.iter()
        .zip(target)
        .map(|(&p, &y)| {
            let pos = if p > LOG_EPS { -y / p } else { 0.0 };
            let neg = if 1.0 - p > LOG_EPS { (1.0 - y) / (1.0 - p) } else { 0.0 };
            pos + neg
        })
        .collect()
}

/// Mean of the per-sample loss over a batch.
pub fn multilabel_xent_batch(preds: &[Vec<f64>], targets: &[MultiHot]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let total: f64 = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| multilabel_xent(p, &t.to_f64()))
        .sum();
    total / preds.len() as f64
}
