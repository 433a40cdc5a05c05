use crate::error::Result;

use super::matrix::{check_aligned, PredictionMatrix};

fn combine(matrices: &[PredictionMatrix], name: &str, mut f: impl FnMut(&[f64]) -> f64) -> Result<PredictionMatrix> {
    check_aligned(matrices)?;
    let first = &matrices[0];
    let mut column = vec![0.0; matrices.len()];
    let values = (0..first.values().len())
        .map(|j| {
            for (c, m) in column.iter_mut().zip(matrices) {
                *c = m.values()[j];
            }
            f(&column)
        })
        .collect();
    let inputs: Vec<&str> = matrices.iter().map(|m| m.modality.as_str()).collect();
    Ok(PredictionMatrix::new(name, first.ids().to_vec(), first.num_labels(), values)?
        .with_labels_hash(first.labels_hash)
        .with_param("policy", name)
        .with_param("inputs", inputs.join("+")))
}

/// Element-wise maximum over aligned matrices.
pub fn fuse_max(matrices: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    combine(matrices, "max", |xs| xs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Element-wise arithmetic mean over aligned matrices. Each column is summed
/// in sorted order and clamped to its own range, so the result does not
/// depend on modality order and `k` copies of a matrix give it back exactly.
pub fn fuse_mean(matrices: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    let mut sorted = Vec::with_capacity(matrices.len());
    combine(matrices, "mean", |xs| {
        sorted.clear();
        sorted.extend_from_slice(xs);
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        mean.clamp(sorted[0], sorted[sorted.len() - 1])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(name: &str, row: &[f64]) -> PredictionMatrix {
        PredictionMatrix::from_rows(name, vec!["p".into()], &[row.to_vec()]).unwrap()
    }

    #[test]
    fn pointwise_examples() {
        let a = m("a", &[0.2, 0.9]);
        let b = m("b", &[0.6, 0.1]);
        let c = m("c", &[0.4, 0.5]);
        let max = fuse_max(&[a.clone(), b.clone(), c.clone()]).unwrap();
        assert_eq!(max.values(), [0.6, 0.9]);
        assert_eq!(max.params["inputs"], "a+b+c");
        let mean = fuse_mean(&[a, b, c]).unwrap();
        assert!((mean.values()[0] - 0.4).abs() < 1e-15);
        assert!((mean.values()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unaligned_inputs_are_rejected() {
        let a = m("a", &[0.2, 0.9]);
        let b = PredictionMatrix::from_rows("b", vec!["q".into()], &[vec![0.1, 0.1]]).unwrap();
        assert!(fuse_max(&[a.clone(), b]).is_err());
        assert!(fuse_mean(&[a, m("c", &[0.1])]).is_err());
        assert!(fuse_mean(&[]).is_err());
    }
}
