use crate::error::{Error, Result};
use crate::label_space::MultiHot;

use super::matrix::{check_aligned, PredictionMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    pub alpha: f64,
    /// Append an unpenalized constant column to the design matrix.
    pub fit_intercept: bool,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            alpha: 1.0,
            fit_intercept: false,
        }
    }
}

/// A linear map from the concatenated modality scores to per-label scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub alpha: f64,
    pub arity: usize,
    pub num_labels: usize,
    pub fit_intercept: bool,
    /// `features x num_labels`, row-major; the intercept row comes last.
    pub weights: Vec<f64>,
}

impl RidgeModel {
    pub fn num_features(&self) -> usize {
        self.arity * self.num_labels + usize::from(self.fit_intercept)
    }
}

/// Concatenates aligned matrices row by row into an `N x (k*L)` design matrix,
/// optionally followed by a column of ones.
pub fn design_matrix(matrices: &[PredictionMatrix], intercept: bool) -> Result<(Vec<f64>, usize)> {
    check_aligned(matrices)?;
    let n = matrices[0].num_rows();
    let p = matrices.len() * matrices[0].num_labels() + usize::from(intercept);
    let mut x = Vec::with_capacity(n * p);
    for i in 0..n {
        for m in matrices {
            x.extend_from_slice(m.row(i));
        }
        if intercept {
            x.push(1.0);
        }
    }
    Ok((x, p))
}

/// Solves `A X = B` in place for symmetric positive definite `A` (`p x p`)
/// and `B` (`p x m`), leaving the solution in `b`.
pub fn cholesky_solve(a: &[f64], p: usize, b: &mut [f64], m: usize) -> Result<()> {
    assert_eq!(a.len(), p * p);
    assert_eq!(b.len(), p * m);
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max);
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if !(d > floor) {
            return Err(Error::Singular { row: j, pivot: d });
        }
        let d = d.sqrt();
        l[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / d;
        }
    }
    for c in 0..m {
        // L y = b
        for i in 0..p {
            let mut s = b[i * m + c];
            for k in 0..i {
                s -= l[i * p + k] * b[k * m + c];
            }
            b[i * m + c] = s / l[i * p + i];
        }
        // L^T x = y
        for i in (0..p).rev() {
            let mut s = b[i * m + c];
            for k in i + 1..p {
                s -= l[k * p + i] * b[k * m + c];
            }
            b[i * m + c] = s / l[i * p + i];
        }
    }
    Ok(())
}

/// Solves `(X^T X + alpha I) W = X^T Y` with one step of iterative
/// refinement. When `unpenalized` is set, that feature gets no ridge term.
pub fn solve_ridge(
    x: &[f64],
    p: usize,
    y: &[f64],
    m: usize,
    alpha: f64,
    unpenalized: Option<usize>,
) -> Result<Vec<f64>> {
    let n = x.len().checked_div(p).unwrap_or(0);
    if x.len() != n * p || y.len() != n * m {
        return Err(Error::Shape("design and target matrices disagree".into()));
    }
    let mut a = vec![0.0; p * p];
    let mut b = vec![0.0; p * m];
    for r in 0..n {
        let xr = &x[r * p..(r + 1) * p];
        let yr = &y[r * m..(r + 1) * m];
        for i in 0..p {
            if xr[i] == 0.0 {
                continue;
            }
            for j in 0..p {
                a[i * p + j] += xr[i] * xr[j];
            }
            for c in 0..m {
                b[i * m + c] += xr[i] * yr[c];
            }
        }
    }
    for i in 0..p {
        if Some(i) != unpenalized {
            a[i * p + i] += alpha;
        }
    }
    let mut w = b.clone();
    cholesky_solve(&a, p, &mut w, m)?;
    let mut residual = b;
    for i in 0..p {
        for k in 0..p {
            let aik = a[i * p + k];
            for c in 0..m {
                residual[i * m + c] -= aik * w[k * m + c];
            }
        }
    }
    cholesky_solve(&a, p, &mut residual, m)?;
    for (wi, d) in w.iter_mut().zip(&residual) {
        *wi += d;
    }
    Ok(w)
}

pub fn train_ridge(matrices: &[PredictionMatrix], targets: &[MultiHot], config: &RidgeConfig) -> Result<RidgeModel> {
    if !(config.alpha >= 0.0) || !config.alpha.is_finite() {
        return Err(Error::Invalid(format!("alpha must be finite and >= 0, got {}", config.alpha)));
    }
    let (x, p) = design_matrix(matrices, config.fit_intercept)?;
    let l = matrices[0].num_labels();
    let n = matrices[0].num_rows();
    if targets.len() != n || targets.iter().any(|t| t.len() != l) {
        return Err(Error::Shape(format!("expected {n} targets of length {l}")));
    }
    let y: Vec<f64> = targets.iter().flat_map(MultiHot::to_f64).collect();
    let unpenalized = config.fit_intercept.then_some(p - 1);
    let weights = solve_ridge(&x, p, &y, l, config.alpha, unpenalized)?;
    Ok(RidgeModel {
        alpha: config.alpha,
        arity: matrices.len(),
        num_labels: l,
        fit_intercept: config.fit_intercept,
        weights,
    })
}

/// Raw linear scores `X W`, one row per product.
pub fn ridge_scores(model: &RidgeModel, matrices: &[PredictionMatrix]) -> Result<Vec<f64>> {
    if matrices.len() != model.arity {
        return Err(Error::Arity {
            expected: model.arity,
            got: matrices.len(),
        });
    }
    let (x, p) = design_matrix(matrices, model.fit_intercept)?;
    if p != model.num_features() {
        return Err(Error::Shape(format!(
            "model expects {} features, inputs give {p}",
            model.num_features()
        )));
    }
    let l = model.num_labels;
    let mut out = vec![0.0; x.len() / p.max(1) * l];
    for (xr, or) in x.chunks_exact(p).zip(out.chunks_exact_mut(l)) {
        for (xi, wr) in xr.iter().zip(model.weights.chunks_exact(l)) {
            for (o, w) in or.iter_mut().zip(wr) {
                *o += xi * w;
            }
        }
    }
    Ok(out)
}

/// Linear scores clamped into `[0, 1]`.
pub fn apply_ridge(model: &RidgeModel, matrices: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    let scores = ridge_scores(model, matrices)?;
    let first = &matrices[0];
    let inputs: Vec<&str> = matrices.iter().map(|m| m.modality.as_str()).collect();
    Ok(PredictionMatrix::new(
        "ridge",
        first.ids().to_vec(),
        model.num_labels,
        scores.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    )?
    .with_labels_hash(first.labels_hash)
    .with_param("policy", "ridge")
    .with_param("alpha", model.alpha)
    .with_param("inputs", inputs.join("+")))
}
