use crate::error::{Error, Result};
use crate::label_space::MultiHot;
use crate::text_prep::{EmbeddingTable, PAD};

use super::network::{Input, InputShape, Network};
use super::train::{train_network, EpochStats, TrainConfig};
use super::{Activation, Layer, LayerSpec};

/// Size knobs of the convolutional text classifier. The default is the
/// full-size model: 200 filters of width 5, a 170-unit ReLU layer, dropout 0.5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextCnnShape {
    pub kernel: usize,
    pub filters: usize,
    pub hidden: usize,
    pub dropout: f64,
}

impl Default for TextCnnShape {
    fn default() -> Self {
        TextCnnShape {
            kernel: 5,
            filters: 200,
            hidden: 170,
            dropout: 0.5,
        }
    }
}

/// embedding -> conv1d(relu) -> global max pool -> dense(relu) -> dropout ->
/// dense(sigmoid, one unit per label).
pub fn text_cnn_arch(vocab: usize, dim: usize, labels: usize, shape: TextCnnShape) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Embedding { vocab, dim },
        LayerSpec::Conv1d {
            kernel: shape.kernel,
            filters: shape.filters,
            activation: Activation::Relu,
        },
        LayerSpec::GlobalMaxPool,
        LayerSpec::Dense {
            units: shape.hidden,
            activation: Activation::Relu,
        },
        LayerSpec::Dropout { rate: shape.dropout },
        LayerSpec::Dense {
            units: labels,
            activation: Activation::Sigmoid,
        },
    ]
}

/// A token-sequence classifier: an embedding-first network with sigmoid
/// outputs over fixed-length index sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct TextCnnModel {
    pub network: Network,
}

impl TextCnnModel {
    /// Initialises a model from `arch` (weights from `seed`) and installs
    /// `table` as its embedding.
    pub fn new(table: &EmbeddingTable, arch: &[LayerSpec], max_len: usize, seed: u64) -> Result<Self> {
        match arch.first() {
            Some(&LayerSpec::Embedding { vocab, dim }) if vocab == table.rows() && dim == table.dim => {}
            _ => {
                return Err(Error::Invalid(format!(
                    "architecture must start with embedding:{}:{}",
                    table.rows(),
                    table.dim
                )))
            }
        }
        let mut network = Network::new(InputShape::Tokens { len: max_len }, arch, seed)?;
        Self::check_network(&network)?;
        if let Some(Layer::Embedding { table: t, .. }) = network.layers_mut().first_mut() {
            t.copy_from_slice(&table.values);
            t[PAD * table.dim..(PAD + 1) * table.dim].fill(0.0);
        }
        Ok(TextCnnModel { network })
    }

    pub fn from_network(network: Network) -> Result<Self> {
        Self::check_network(&network)?;
        Ok(TextCnnModel { network })
    }

    fn check_network(network: &Network) -> Result<()> {
        if !matches!(network.input_shape(), InputShape::Tokens { .. }) {
            return Err(Error::Invalid("text classifier must consume tokens".into()));
        }
        if network.final_activation() != Some(Activation::Sigmoid) {
            return Err(Error::Invalid("text classifier must end in a sigmoid dense layer".into()));
        }
        Ok(())
    }

    pub fn max_len(&self) -> usize {
        match self.network.input_shape() {
            InputShape::Tokens { len } => len,
            InputShape::Features { .. } => unreachable!("checked at construction"),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.network.output_dim()
    }

    pub fn embedding(&self) -> &[f64] {
        match self.network.layers().first() {
            Some(Layer::Embedding { table, .. }) => table,
            _ => unreachable!("checked at construction"),
        }
    }

    /// Sigmoid probabilities per sequence, dropout disabled.
    pub fn predict(&self, sequences: &[Vec<usize>]) -> Result<Vec<Vec<f64>>> {
        sequences
            .iter()
            .map(|s| {
                if s.len() != self.max_len() {
                    return Err(Error::Shape(format!(
                        "sequence length {} differs from model length {}",
                        s.len(),
                        self.max_len()
                    )));
                }
                self.network.predict(Input::Tokens(s))
            })
            .collect()
    }
}

/// Builds a text classifier from `arch`, then trains it. With
/// `config.epochs == 0` the initialised model is returned untouched.
pub fn train_text_cnn(
    table: &EmbeddingTable,
    arch: &[LayerSpec],
    sequences: &[Vec<usize>],
    targets: &[MultiHot],
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(TextCnnModel, Vec<EpochStats>)> {
    let max_len = sequences
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Invalid("training corpus is empty".into()))?;
    if sequences.iter().any(|s| s.len() != max_len) {
        return Err(Error::Shape("training sequences differ in length".into()));
    }
    let mut model = TextCnnModel::new(table, arch, max_len, config.seed)?;
    let inputs: Vec<Input<'_>> = sequences.iter().map(|s| Input::Tokens(s)).collect();
    let history = train_network(&mut model.network, &inputs, targets, config, on_epoch)?;
    Ok((model, history))
}
