use crate::error::{Error, Result};
use crate::label_space::MultiHot;
use crate::nn::{train_network, Activation, EpochStats, Input, InputShape, LayerSpec, Network, TrainConfig};

use super::matrix::{check_aligned, PredictionMatrix};

/// Shape of a fusion MLP: `arity` concatenated probability vectors in, one
/// sigmoid unit per label out.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetworkSpec {
    pub arity: usize,
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl PolicyNetworkSpec {
    /// Two modalities, 200-150-L units, sigmoid throughout.
    pub fn bimodal(num_labels: usize) -> Self {
        PolicyNetworkSpec {
            arity: 2,
            sizes: vec![200, 150, num_labels],
            activations: vec![Activation::Sigmoid; 3],
        }
    }

    /// Three modalities, tanh on the middle layer. The 200/150 hidden sizes
    /// are a default, see [`PolicyNetworkSpec::with_hidden`].
    pub fn trimodal(num_labels: usize) -> Self {
        PolicyNetworkSpec {
            arity: 3,
            sizes: vec![200, 150, num_labels],
            activations: vec![Activation::Sigmoid, Activation::Tanh, Activation::Sigmoid],
        }
    }

    /// Replaces the hidden layer sizes, keeping the output layer.
    pub fn with_hidden(mut self, hidden: &[usize]) -> Result<Self> {
        if hidden.len() + 1 != self.sizes.len() {
            return Err(Error::Invalid(format!(
                "expected {} hidden sizes, got {}",
                self.sizes.len() - 1,
                hidden.len()
            )));
        }
        self.sizes[..hidden.len()].copy_from_slice(hidden);
        self.validate()?;
        Ok(self)
    }

    pub fn num_labels(&self) -> usize {
        self.sizes.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.arity == 0 {
            return Err(Error::Invalid("policy network arity must be positive".into()));
        }
        if self.sizes.is_empty() || self.sizes.len() != self.activations.len() {
            return Err(Error::Invalid("policy network needs one activation per layer".into()));
        }
        if self.sizes.contains(&0) {
            return Err(Error::Invalid("policy network layers need at least one unit".into()));
        }
        if self.activations.contains(&Activation::Identity) {
            return Err(Error::Invalid("policy network activations must be sigmoid, tanh or relu".into()));
        }
        if self.activations.last() != Some(&Activation::Sigmoid) {
            return Err(Error::Invalid("the last policy layer must be sigmoid".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.arity * self.num_labels()
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.sizes
            .iter()
            .zip(&self.activations)
            .map(|(&units, &activation)| LayerSpec::Dense { units, activation })
            .collect()
    }

    /// `sigmoid/tanh/sigmoid` style summary.
    pub fn activation_string(&self) -> String {
        let names: Vec<&str> = self.activations.iter().map(|a| a.name()).collect();
        names.join("/")
    }

    pub fn build(&self, seed: u64) -> Result<PolicyNetwork> {
        self.validate()?;
        let network = Network::new(
            InputShape::Features { dim: self.input_dim() },
            &self.layer_specs(),
            seed,
        )?;
        Ok(PolicyNetwork {
            spec: self.clone(),
            network,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    pub spec: PolicyNetworkSpec,
    pub network: Network,
}

impl PolicyNetwork {
    /// Rebuilds the spec from a dense-only network.
    pub fn from_network(arity: usize, network: Network) -> Result<Self> {
        let mut sizes = Vec::new();
        let mut activations = Vec::new();
        for spec in network.specs() {
            match spec {
                LayerSpec::Dense { units, activation } => {
                    sizes.push(units);
                    activations.push(activation);
                }
                other => {
                    return Err(Error::Invalid(format!("policy networks are dense-only, found `{other}`")));
                }
            }
        }
        let spec = PolicyNetworkSpec {
            arity,
            sizes,
            activations,
        };
        spec.validate()?;
        if network.input_shape() != (InputShape::Features { dim: spec.input_dim() }) {
            return Err(Error::Shape(format!(
                "network input {} does not fit {arity} x {} probabilities",
                network.input_shape(),
                spec.num_labels()
            )));
        }
        Ok(PolicyNetwork { spec, network })
    }
}

fn features(spec: &PolicyNetworkSpec, matrices: &[PredictionMatrix]) -> Result<Vec<Vec<f64>>> {
    if matrices.len() != spec.arity {
        return Err(Error::Arity {
            expected: spec.arity,
            got: matrices.len(),
        });
    }
    check_aligned(matrices)?;
    if matrices[0].num_labels() != spec.num_labels() {
        return Err(Error::Shape(format!(
            "policy network has {} outputs, matrices have {} labels",
            spec.num_labels(),
            matrices[0].num_labels()
        )));
    }
    Ok((0..matrices[0].num_rows())
        .map(|i| matrices.iter().flat_map(|m| m.row(i).iter().copied()).collect())
        .collect())
}

/// Trains a fusion MLP on the concatenated rows of `matrices`, initialised
/// from `config.seed`.
pub fn train_policy_network(
    spec: &PolicyNetworkSpec,
    matrices: &[PredictionMatrix],
    targets: &[MultiHot],
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(PolicyNetwork, Vec<EpochStats>)> {
    let mut model = spec.build(config.seed)?;
    let rows = features(spec, matrices)?;
    let inputs: Vec<Input<'_>> = rows.iter().map(|r| Input::Features(r)).collect();
    let history = train_network(&mut model.network, &inputs, targets, config, on_epoch)?;
    Ok((model, history))
}

pub fn apply_policy_network(model: &PolicyNetwork, matrices: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    let rows = features(&model.spec, matrices)?;
    let mut values = Vec::with_capacity(rows.len() * model.spec.num_labels());
    for r in &rows {
        values.extend(model.network.predict(Input::Features(r))?);
    }
    let first = &matrices[0];
    let inputs: Vec<&str> = matrices.iter().map(|m| m.modality.as_str()).collect();
    let hidden: Vec<String> = model.spec.sizes.iter().map(usize::to_string).collect();
    Ok(
        PredictionMatrix::new("mlp", first.ids().to_vec(), model.spec.num_labels(), values)?
            .with_labels_hash(first.labels_hash)
            .with_param("policy", "mlp")
            .with_param("arity", model.spec.arity)
            .with_param("sizes", hidden.join("/"))
            .with_param("activations", model.spec.activation_string())
            .with_param("inputs", inputs.join("+")),
    )
}
