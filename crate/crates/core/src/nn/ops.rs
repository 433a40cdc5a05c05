//! Forward and backward kernels for the fixed layer kinds.
//!
//! Backward kernels accumulate (`+=`) into parameter gradients so a mini-batch
//! can be summed in place.

use rand::Rng;

use crate::error::{Error, Result};
use crate::text_prep::PAD;

use super::{Activation, Tensor};

/// Row `i` of the output is row `indices[i]` of the `rows x dim` table.
pub fn embedding_forward(indices: &[usize], table: &[f64], dim: usize) -> Result<Tensor> {
    if indices.is_empty() {
        return Err(Error::EmptySequence);
    }
    let rows = table.len() / dim;
    let mut out = Vec::with_capacity(indices.len() * dim);
    for &i in indices {
        if i >= rows {
            return Err(Error::IndexOutOfRange { index: i, rows });
        }
        out.extend_from_slice(&table[i * dim..(i + 1) * dim]);
    }
    Tensor::matrix(indices.len(), dim, out)
}

/// Scatters `grad_out` rows back onto the table; the padding row never
/// receives gradient.
pub fn embedding_backward(indices: &[usize], grad_out: &[f64], dim: usize, grad_table: &mut [f64]) {
    for (pos, &i) in indices.iter().enumerate() {
        if i == PAD {
            continue;
        }
        let g = &grad_out[pos * dim..(pos + 1) * dim];
        for (acc, &v) in grad_table[i * dim..(i + 1) * dim].iter_mut().zip(g) {
            *acc += v;
        }
    }
}

/// Valid (unpadded) convolution over time. `x` is `len x dim`, `weights` is
/// `filters x kernel x dim`, output is `(len - kernel + 1) x filters`. No
/// activation is applied.
pub fn conv1d_forward(
    x: &Tensor,
    kernel: usize,
    filters: usize,
    weights: &[f64],
    bias: &[f64],
) -> Result<Tensor> {
    let (len, dim) = (x.rows(), x.cols());
    if kernel == 0 || len < kernel {
        return Err(Error::SequenceTooShort { len, kernel });
    }
    let window = kernel * dim;
    if weights.len() != filters * window || bias.len() != filters {
        return Err(Error::Shape(format!(
            "conv1d expects {} weights and {filters} biases, got {} and {}",
            filters * window,
            weights.len(),
            bias.len()
        )));
    }
    let steps = len - kernel + 1;
    let xs = x.data();
    let mut out = vec![0.0; steps * filters];
    for t in 0..steps {
        let patch = &xs[t * dim..t * dim + window];
        for f in 0..filters {
            let w = &weights[f * window..(f + 1) * window];
            out[t * filters + f] = bias[f] + dot(patch, w);
        }
    }
    Tensor::matrix(steps, filters, out)
}

/// Gradient of [`conv1d_forward`]; returns the gradient w.r.t. `x`.
pub fn conv1d_backward(
    x: &Tensor,
    kernel: usize,
    filters: usize,
    weights: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Tensor {
    let (len, dim) = (x.rows(), x.cols());
    let window = kernel * dim;
    let steps = len - kernel + 1;
    let xs = x.data();
    let mut dx = vec![0.0; len * dim];
    for t in 0..steps {
        let patch = &xs[t * dim..t * dim + window];
        for f in 0..filters {
            let g = grad_out[t * filters + f];
            if g == 0.0 {
                continue;
            }
            grad_b[f] += g;
            axpy(g, patch, &mut grad_w[f * window..(f + 1) * window]);
            axpy(g, &weights[f * window..(f + 1) * window], &mut dx[t * dim..t * dim + window]);
        }
    }
    Tensor::matrix(len, dim, dx).expect("input shape is valid")
}

/// Per-channel maximum over time, with the first maximising step recorded
/// for gradient routing.
pub fn global_max_pool(x: &Tensor) -> (Vec<f64>, Vec<usize>) {
    let (steps, channels) = (x.rows(), x.cols());
    let mut best = x.row(0).to_vec();
    let mut argmax = vec![0; channels];
    for t in 1..steps {
        for (c, &v) in x.row(t).iter().enumerate() {
            if v > best[c] {
                best[c] = v;
                argmax[c] = t;
            }
        }
    }
    (best, argmax)
}

pub fn global_max_pool_backward(argmax: &[usize], steps: usize, grad_out: &[f64]) -> Tensor {
    let channels = argmax.len();
    let mut dx = vec![0.0; steps * channels];
    for (c, (&t, &g)) in argmax.iter().zip(grad_out).enumerate() {
        dx[t * channels + c] = g;
    }
    Tensor::matrix(steps, channels, dx).expect("pool input shape is valid")
}

/// `activation(x W + b)` with `W` stored `in x units`, row-major.
pub fn dense_forward(
    x: &[f64],
    weights: &[f64],
    bias: &[f64],
    activation: Activation,
) -> Result<Vec<f64>> {
    let units = bias.len();
    if weights.len() != x.len() * units {
        return Err(Error::Shape(format!(
            "dense layer with {} weights cannot map {} inputs to {units} units",
            weights.len(),
            x.len()
        )));
    }
    let mut out = bias.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            axpy(xi, &weights[i * units..(i + 1) * units], &mut out);
        }
    }
    for v in &mut out {
        *v = activation.apply(*v);
    }
    Ok(out)
}

/// Gradient of [`dense_forward`]. When `preactivation` is set, `grad_out` is
/// already the gradient w.r.t. `xW + b` and the activation derivative is
/// skipped.
#[allow(clippy::too_many_arguments)]
pub fn dense_backward(
    x: &[f64],
    output: &[f64],
    weights: &[f64],
    activation: Activation,
    grad_out: &[f64],
    preactivation: bool,
    grad_w: &mut [f64],
    grad_b: &mut [f64],
) -> Vec<f64> {
    let units = output.len();
    let delta: Vec<f64> = if preactivation {
        grad_out.to_vec()
    } else {
        grad_out
            .iter()
            .zip(output)
            .map(|(&g, &y)| g * activation.derivative(y))
            .collect()
    };
    for (b, d) in grad_b.iter_mut().zip(&delta) {
        *b += d;
    }
    let mut dx = vec![0.0; x.len()];
    for (i, &xi) in x.iter().enumerate() {
        let w = &weights[i * units..(i + 1) * units];
        if xi != 0.0 {
            axpy(xi, &delta, &mut grad_w[i * units..(i + 1) * units]);
        }
        dx[i] = dot(w, &delta);
    }
    dx
}

/// Inverted dropout. Returns the output and, in training mode with a positive
/// rate, the scaling mask that was applied.
pub fn dropout_forward<R: Rng + ?Sized>(
    x: &[f64],
    rate: f64,
    training: bool,
    rng: &mut R,
) -> (Vec<f64>, Option<Vec<f64>>) {
    if !training || rate == 0.0 {
        return (x.to_vec(), None);
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = x
        .iter()
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
    (out, Some(mask))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
