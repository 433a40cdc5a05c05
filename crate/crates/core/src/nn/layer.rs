use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::text_prep::INIT_RANGE;

use super::Activation;

/// Architecture description of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Embedding { vocab: usize, dim: usize },
    /// Valid 1-D convolution over time followed by `activation`.
    Conv1d {
        kernel: usize,
        filters: usize,
        activation: Activation,
    },
    GlobalMaxPool,
    Dense { units: usize, activation: Activation },
    Dropout { rate: f64 },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Embedding { .. } => "embedding",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::GlobalMaxPool => "global_max_pool",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LayerSpec::Embedding { vocab, dim } => vocab > 0 && dim > 0,
            LayerSpec::Conv1d { kernel, filters, .. } => kernel > 0 && filters > 0,
            LayerSpec::GlobalMaxPool => true,
            LayerSpec::Dense { units, .. } => units > 0,
            LayerSpec::Dropout { rate } => (0.0..1.0).contains(&rate),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid layer parameters in `{self}`")))
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Embedding { vocab, dim } => write!(f, "embedding:{vocab}:{dim}"),
            LayerSpec::Conv1d {
                kernel,
                filters,
                activation,
            } => write!(f, "conv1d:{kernel}:{filters}:{activation}"),
            LayerSpec::GlobalMaxPool => f.write_str("global_max_pool"),
            LayerSpec::Dense { units, activation } => write!(f, "dense:{units}:{activation}"),
            LayerSpec::Dropout { rate } => write!(f, "dropout:{rate}"),
        }
    }
}

impl FromStr for LayerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Invalid(format!("cannot parse layer `{s}`"));
        let num = |p: &str| p.parse::<usize>().map_err(|_| bad());
        let spec = match parts.as_slice() {
            ["embedding", v, d] => LayerSpec::Embedding {
                vocab: num(v)?,
                dim: num(d)?,
            },
            ["conv1d", k, f, a] => LayerSpec::Conv1d {
                kernel: num(k)?,
                filters: num(f)?,
                activation: a.parse()?,
            },
            ["global_max_pool"] => LayerSpec::GlobalMaxPool,
            ["dense", u, a] => LayerSpec::Dense {
                units: num(u)?,
                activation: a.parse()?,
            },
            ["dropout", r] => LayerSpec::Dropout {
                rate: r.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Space-separated layer list, e.g. `dense:200:sigmoid dense:30:sigmoid`.
pub fn format_arch(specs: &[LayerSpec]) -> String {
    specs.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn parse_arch(s: &str) -> Result<Vec<LayerSpec>> {
    s.split_whitespace().map(str::parse).collect()
}

/// A layer with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Embedding {
        vocab: usize,
        dim: usize,
        table: Vec<f64>,
    },
    Conv1d {
        kernel: usize,
        in_dim: usize,
        filters: usize,
        activation: Activation,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    GlobalMaxPool,
    Dense {
        in_dim: usize,
        units: usize,
        activation: Activation,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Dropout {
        rate: f64,
    },
}

fn glorot<R: Rng + ?Sized>(rng: &mut R, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..=limit)).collect()
}

impl Layer {
    /// Instantiates `spec` for an input whose last dimension is `in_dim`.
    pub(crate) fn init<R: Rng + ?Sized>(spec: &LayerSpec, in_dim: usize, rng: &mut R) -> Self {
        match *spec {
            LayerSpec::Embedding { vocab, dim } => {
                let mut table: Vec<f64> = (0..vocab * dim)
                    .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
                    .collect();
                table[..dim].fill(0.0);
                Layer::Embedding { vocab, dim, table }
            }
            LayerSpec::Conv1d {
                kernel,
                filters,
                activation,
            } => Layer::Conv1d {
                kernel,
                in_dim,
                filters,
                activation,
                weights: glorot(rng, filters * kernel * in_dim, kernel * in_dim, kernel * filters),
                bias: vec![0.0; filters],
            },
            LayerSpec::GlobalMaxPool => Layer::GlobalMaxPool,
            LayerSpec::Dense { units, activation } => Layer::Dense {
                in_dim,
                units,
                activation,
                weights: glorot(rng, in_dim * units, in_dim, units),
                bias: vec![0.0; units],
            },
            LayerSpec::Dropout { rate } => Layer::Dropout { rate },
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match *self {
            Layer::Embedding { vocab, dim, .. } => LayerSpec::Embedding { vocab, dim },
            Layer::Conv1d {
                kernel,
                filters,
                activation,
                ..
            } => LayerSpec::Conv1d {
                kernel,
                filters,
                activation,
            },
            Layer::GlobalMaxPool => LayerSpec::GlobalMaxPool,
            Layer::Dense {
                units, activation, ..
            } => LayerSpec::Dense { units, activation },
            Layer::Dropout { rate } => LayerSpec::Dropout { rate },
        }
    }

    /// Parameter arrays in declaration order, with their names and shapes.
    pub fn params(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        match self {
            Layer::Embedding { vocab, dim, table } => vec![("table", vec![*vocab, *dim], table)],
            Layer::Conv1d {
                kernel,
                in_dim,
                filters,
                weights,
                bias,
                ..
            } => vec![
                ("weight", vec![*filters, *kernel, *in_dim], weights),
                ("bias", vec![*filters], bias),
            ],
            Layer::Dense {
                in_dim,
                units,
                weights,
                bias,
                ..
            } => vec![("weight", vec![*in_dim, *units], weights), ("bias", vec![*units], bias)],
            Layer::GlobalMaxPool | Layer::Dropout { .. } => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Embedding { table, .. } => vec![table],
            Layer::Conv1d { weights, bias, .. } | Layer::Dense { weights, bias, .. } => {
                vec![weights, bias]
            }
            Layer::GlobalMaxPool | Layer::Dropout { .. } => vec![],
        }
    }

    pub fn param_arrays(&self) -> usize {
        match self {
            Layer::Embedding { .. } => 1,
            Layer::Conv1d { .. } | Layer::Dense { .. } => 2,
            Layer::GlobalMaxPool | Layer::Dropout { .. } => 0,
        }
    }
}
