use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::eval::PairCounts;
use crate::label_space::MultiHot;
use crate::rng;

use super::adam::{AdamConfig, AdamState};
use super::loss::{multilabel_xent, multilabel_xent_grad};
use super::network::{Input, Network};
use super::{Activation, Layer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Keep every embedding row fixed (the padding row is always fixed).
    pub freeze_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            lr: adam.lr,
            batch_size: 64,
            epochs: 10,
            seed: 0,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            freeze_embeddings: false,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sample loss over the epoch, measured during training.
    pub loss: f64,
    /// Micro-F1 at threshold 0.5 of the training-mode outputs.
    pub train_micro_f1: f64,
}

impl EpochStats {
    /// `epoch<TAB>loss<TAB>train_microF1`.
    pub fn log_line(&self) -> String {
        format!("{}\t{:.6}\t{:.4}", self.epoch, self.loss, self.train_micro_f1)
    }
}

/// Mini-batch Adam on summed per-class binary cross-entropy. Batch gradients
/// are averaged. Shuffling and dropout use the `shuffle` and `dropout`
/// streams of `config.seed`, so a run is a pure function of its inputs.
pub fn train_network(
    net: &mut Network,
    inputs: &[Input<'_>],
    targets: &[MultiHot],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    if inputs.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} inputs but {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let out_dim = net.output_dim();
    if let Some(t) = targets.iter().find(|t| t.len() != out_dim) {
        return Err(Error::Shape(format!(
            "target length {} differs from network output {out_dim}",
            t.len()
        )));
    }
    if config.batch_size == 0 || !(config.lr > 0.0) {
        return Err(Error::Invalid("batch_size and lr must be positive".into()));
    }

    let fused_sigmoid = net.final_activation() == Some(Activation::Sigmoid);
    let frozen: Vec<bool> = net
        .layers()
        .iter()
        .flat_map(|l| {
            let freeze = config.freeze_embeddings && matches!(l, Layer::Embedding { .. });
            std::iter::repeat_n(freeze, l.param_arrays())
        })
        .collect();
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(config.adam(), &sizes);
    let mut grads = net.zero_gradients();
    let mut shuffle = rng::stream(config.seed, rng::SHUFFLE);
    let mut dropout = rng::stream(config.seed, rng::DROPOUT);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        let mut counts = PairCounts::default();
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            grads.zero();
            let mut batch_loss = 0.0;
            let mut finite = true;
            for &i in batch {
                let trace = net.forward(inputs[i], Some(&mut dropout))?;
                finite &= trace.output.iter().all(|v| v.is_finite());
                let target = targets[i].to_f64();
                batch_loss += multilabel_xent(&trace.output, &target);
                counts.add_row(&trace.output, &targets[i], 0.5);
                let grad_out: Vec<f64> = if fused_sigmoid {
                    trace.output.iter().zip(&target).map(|(p, y)| p - y).collect()
                } else {
                    multilabel_xent_grad(&trace.output, &target)
                };
                net.backward(&trace, &grad_out, fused_sigmoid, &mut grads);
            }
            if !finite || !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    lr: config.lr,
                });
            }
            loss_sum += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            for (g, &f) in grads.arrays.iter_mut().zip(&frozen) {
                if f {
                    g.fill(0.0);
                }
            }
            adam.step(net.params_mut().into_iter().map(Vec::as_mut_slice), &grads.arrays)?;
        }
        let stats = EpochStats {
            epoch,
            loss: loss_sum / inputs.len() as f64,
            train_micro_f1: counts.f1(),
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{InputShape, LayerSpec};

    fn bias_only() -> Network {
        // A dense layer fed a constant zero vector is a bias-only model.
        Network::new(
            InputShape::Features { dim: 1 },
            &[LayerSpec::Dense {
                units: 3,
                activation: Activation::Sigmoid,
            }],
            1,
        )
        .unwrap()
    }

    #[test]
    fn bias_only_loss_strictly_decreases() {
        let mut net = bias_only();
        let x = [0.0];
        let inputs = vec![Input::Features(&x); 4];
        let targets = vec![MultiHot::from_bits(&[1, 0, 1]); 4];
        let config = TrainConfig {
            epochs: 10,
            batch_size: 4,
            lr: 0.05,
            ..TrainConfig::default()
        };
        let hist = train_network(&mut net, &inputs, &targets, &config, |_| {}).unwrap();
        assert_eq!(hist.len(), 10);
        for w in hist.windows(2) {
            assert!(w[1].loss < w[0].loss, "{:?}", hist);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut net = bias_only();
        let x = [0.0];
        let cfg = TrainConfig::default();
        assert!(train_network(&mut net, &[], &[], &cfg, |_| {}).is_err());
        assert!(train_network(&mut net, &[Input::Features(&x)], &[MultiHot::zeros(2)], &cfg, |_| {}).is_err());
        let bad_lr = TrainConfig { lr: 0.0, ..cfg };
        assert!(train_network(&mut net, &[Input::Features(&x)], &[MultiHot::zeros(3)], &bad_lr, |_| {}).is_err());
    }

    #[test]
    fn non_finite_outputs_abort_training() {
        let mut net = bias_only();
        net.params_mut()[1][0] = f64::NAN;
        let x = [0.0];
        let cfg = TrainConfig { lr: 0.5, epochs: 3, ..TrainConfig::default() };
        let err = train_network(&mut net, &[Input::Features(&x)], &[MultiHot::from_bits(&[1, 0, 0])], &cfg, |_| {});
        assert!(
            matches!(err, Err(Error::NonFiniteLoss { epoch: 1, batch: 0, lr }) if lr == 0.5),
            "{err:?}"
        );
    }

    #[test]
    fn log_line_format() {
        let s = EpochStats { epoch: 3, loss: 0.5, train_micro_f1: 0.25 };
        assert_eq!(s.log_line(), "3\t0.500000\t0.2500");
    }
}
