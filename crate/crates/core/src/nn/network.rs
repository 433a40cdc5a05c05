use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

use super::layer::{format_arch, Layer, LayerSpec};
use super::{ops, Activation, Tensor};

/// What a network consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputShape {
    /// A fixed-length sequence of token indices.
    Tokens { len: usize },
    /// A dense feature vector.
    Features { dim: usize },
}

impl fmt::Display for InputShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputShape::Tokens { len } => write!(f, "tokens:{len}"),
            InputShape::Features { dim } => write!(f, "features:{dim}"),
        }
    }
}

impl FromStr for InputShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("cannot parse input shape `{s}`"));
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = n.parse().map_err(|_| bad())?;
        match kind {
            "tokens" => Ok(InputShape::Tokens { len: n }),
            "features" => Ok(InputShape::Features { dim: n }),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Input<'a> {
    Tokens(&'a [usize]),
    Features(&'a [f64]),
}

#[derive(Debug, Clone)]
enum Value {
    Seq(Tensor),
    Flat(Vec<f64>),
}

impl Value {
    fn flat(&self) -> &[f64] {
        match self {
            Value::Seq(t) => t.data(),
            Value::Flat(v) => v,
        }
    }
}

#[derive(Debug, Clone)]
enum Cache {
    Embedding(Vec<usize>),
    Conv { input: Tensor, output: Tensor },
    Pool { argmax: Vec<usize>, steps: usize },
    Dense { input: Vec<f64>, output: Vec<f64> },
    Dropout { mask: Option<Vec<f64>>},
}

/// Forward-pass record needed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<Cache>,
    pub output: Vec<f64>,
}

impl Trace {
    /// Pre-pooling activations of every global max-pool layer, for callers that
    /// need to check tie margins.
    pub fn pool_inputs(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for (i, c) in self.caches.iter().enumerate() {
            if let Cache::Pool { .. } = c {
                if let Some(Cache::Conv { output, .. }) = i.checked_sub(1).map(|j| &self.caches[j]) {
                    out.push(output);
                }
            }
        }
        out
    }
}

/// Per-parameter-array gradient buffers, aligned with [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub arrays: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zero(&mut self) {
        for a in &mut self.arrays {
            a.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in &mut self.arrays {
            a.iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// A feed-forward stack of [`Layer`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input: InputShape,
    layers: Vec<Layer>,
}

impl Network {
    /// Builds and initialises a network. Weights come from the `init` stream of
    /// `seed` (Glorot uniform, zero biases).
    pub fn new(input: InputShape, specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, rng::INIT);
        check_shapes(input, specs)?;
        let mut layers = Vec::with_capacity(specs.len());
        let mut width = match input {
            InputShape::Tokens { .. } => 0,
            InputShape::Features { dim } => dim,
        };
        for spec in specs {
            layers.push(Layer::init(spec, width, &mut rng));
            width = match *spec {
                LayerSpec::Embedding { dim, .. } => dim,
                LayerSpec::Conv1d { filters, .. } => filters,
                LayerSpec::Dense { units, .. } => units,
                LayerSpec::GlobalMaxPool | LayerSpec::Dropout { .. } => width,
            };
        }
        Ok(Network { input, layers })
    }

    /// Rebuilds a network from its architecture and parameter arrays in
    /// declaration order.
    pub fn from_parts(input: InputShape, specs: &[LayerSpec], params: Vec<Vec<f64>>) -> Result<Self> {
        let mut net = Network::new(input, specs, 0)?;
        let expected: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
        let got: Vec<usize> = params.iter().map(Vec::len).collect();
        if expected != got {
            return Err(Error::Shape(format!(
                "parameter arrays {got:?} do not match architecture {expected:?}"
            )));
        }
        for (dst, src) in net.params_mut().into_iter().zip(params) {
            *dst = src;
        }
        Ok(net)
    }

    pub fn input_shape(&self) -> InputShape {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn arch_string(&self) -> String {
        format_arch(&self.specs())
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Dense { units, .. } => Some(*units),
                Layer::Conv1d { filters, .. } => Some(*filters),
                _ => None,
            })
            .unwrap_or(0)
    }

    /// Activation of the final dense layer, if the network ends in one.
    pub fn final_activation(&self) -> Option<Activation> {
        match self.layers.last() {
            Some(Layer::Dense { activation, .. }) => Some(*activation),
            _ => None,
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| l.params().into_iter().map(|(_, _, p)| p))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// `layer<i>.<name>` and shape for each parameter array.
    pub fn param_names(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.params()
                    .into_iter()
                    .map(move |(name, shape, _)| (format!("layer{i}.{name}"), shape))
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            arrays: self.params().iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    fn check_input(&self, input: Input<'_>) -> Result<()> {
        match (self.input, input) {
            (InputShape::Tokens { len }, Input::Tokens(t)) if t.len() == len => Ok(()),
            (InputShape::Features { dim }, Input::Features(x)) if x.len() == dim => Ok(()),
            (expected, got) => Err(Error::Shape(format!(
                "network expects {expected}, got {}",
                match got {
                    Input::Tokens(t) => format!("tokens:{}", t.len()),
                    Input::Features(x) => format!("features:{}", x.len()),
                }
            ))),
        }
    }

    /// Inference-mode forward pass (dropout disabled).
    pub fn predict(&self, input: Input<'_>) -> Result<Vec<f64>> {
        Ok(self.forward(input, None)?.output)
    }

    /// Forward pass. Passing a dropout stream switches dropout layers to
    /// training mode.
    pub fn forward(&self, input: Input<'_>, mut dropout: Option<&mut StreamRng>) -> Result<Trace> {
        self.check_input(input)?;
        let mut value = match input {
            Input::Tokens(_) => Value::Flat(Vec::new()),
            Input::Features(x) => Value::Flat(x.to_vec()),
        };
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (next, cache) = match layer {
                Layer::Embedding { dim, table, .. } => {
                    let Input::Tokens(indices) = input else {
                        unreachable!("checked by check_shapes");
                    };
                    let out = ops::embedding_forward(indices, table, *dim)?;
                    (Value::Seq(out), Cache::Embedding(indices.to_vec()))
                }
                Layer::Conv1d {
                    kernel,
                    filters,
                    activation,
                    weights,
                    bias,
                    ..
                } => {
                    let Value::Seq(x) = value else {
                        unreachable!("checked by check_shapes");
                    };
                    let mut out = ops::conv1d_forward(&x, *kernel, *filters, weights, bias)?;
                    out.data_mut().iter_mut().for_each(|v| *v = activation.apply(*v));
                    (
                        Value::Seq(out.clone()),
                        Cache::Conv {
                            input: x,
                            output: out,
                        },
                    )
                }
                Layer::GlobalMaxPool => {
                    let Value::Seq(x) = &value else {
                        unreachable!("checked by check_shapes");
                    };
                    let (out, argmax) = ops::global_max_pool(x);
                    (
                        Value::Flat(out),
                        Cache::Pool {
                            argmax,
                            steps: x.rows(),
                        },
                    )
                }
                Layer::Dense {
                    activation,
                    weights,
                    bias,
                    ..
                } => {
                    let x = value.flat().to_vec();
                    let out = ops::dense_forward(&x, weights, bias, *activation)?;
                    (
                        Value::Flat(out.clone()),
                        Cache::Dense {
                            input: x,
                            output: out,
                        },
                    )
                }
                Layer::Dropout { rate } => {
                    let seq = match &value {
                        Value::Seq(t) => Some((t.rows(), t.cols())),
                        Value::Flat(_) => None,
                    };
                    let (out, mask) = match dropout.as_deref_mut() {
                        Some(rng) => ops::dropout_forward(value.flat(), *rate, true, rng),
                        None => (value.flat().to_vec(), None),
                    };
                    let next = match seq {
                        Some((r, c)) => Value::Seq(Tensor::matrix(r, c, out)?),
                        None => Value::Flat(out),
                    };
                    (next, Cache::Dropout { mask })
                }
            };
            value = next;
            caches.push(cache);
        }
        let output = match value {
            Value::Seq(t) => t.into_data(),
            Value::Flat(v) => v,
        };
        Ok(Trace { caches, output })
    }

    /// Reverse pass. `grad_out` is dL/d(output), or dL/d(pre-activation of the
    /// last layer) when `preactivation` is set. Parameter gradients are added
    /// into `grads`; the gradient w.r.t. a feature input is returned.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_out: &[f64],
        preactivation: bool,
        grads: &mut Gradients,
    ) -> Option<Vec<f64>> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut next = 0;
        for l in &self.layers {
            offsets.push(next);
            next += l.param_arrays();
        }
        let mut grad = grad_out.to_vec();
        let last = self.layers.len().saturating_sub(1);
        for (i, (layer, cache)) in self.layers.iter().zip(&trace.caches).enumerate().rev() {
            let slot = offsets[i];
            grad = match (layer, cache) {
                (Layer::Embedding { dim, .. }, Cache::Embedding(indices)) => {
                    ops::embedding_backward(indices, &grad, *dim, &mut grads.arrays[slot]);
                    return None;
                }
                (
                    Layer::Conv1d {
                        kernel,
                        filters,
                        activation,
                        weights,
                        ..
                    },
                    Cache::Conv { input, output },
                ) => {
                    let skip = preactivation && i == last;
                    let delta: Vec<f64> = grad
                        .iter()
                        .zip(output.data())
                        .map(|(&g, &y)| if skip { g } else { g * activation.derivative(y) })
                        .collect();
                    let (gw, rest) = grads.arrays[slot..].split_first_mut().expect("conv has weights");
                    let dx = ops::conv1d_backward(input, *kernel, *filters, weights, &delta, gw, &mut rest[0]);
                    dx.into_data()
                }
                (Layer::GlobalMaxPool, Cache::Pool { argmax, steps }) => {
                    ops::global_max_pool_backward(argmax, *steps, &grad).into_data()
                }
                (
                    Layer::Dense {
                        activation,
                        weights,
                        ..
                    },
                    Cache::Dense { input, output },
                ) => {
                    let (gw, rest) = grads.arrays[slot..].split_first_mut().expect("dense has weights");
                    ops::dense_backward(
                        input,
                        output,
                        weights,
                        *activation,
                        &grad,
                        preactivation && i == last,
                        gw,
                        &mut rest[0],
                    )
                }
                (Layer::Dropout { .. }, Cache::Dropout { mask, .. }) => match mask {
                    Some(m) => grad.iter().zip(m).map(|(g, m)| g * m).collect(),
                    None => grad,
                },
                _ => unreachable!("trace does not belong to this network"),
            };
        }
        Some(grad)
    }
}

fn check_shapes(input: InputShape, specs: &[LayerSpec]) -> Result<()> {
    #[derive(Clone, Copy)]
    enum S {
        Tokens(usize),
        Seq(usize, usize),
        Flat(usize),
    }
    let mut shape = match input {
        InputShape::Tokens { len } => S::Tokens(len),
        InputShape::Features { dim } => S::Flat(dim),
    };
    if let S::Tokens(0) | S::Flat(0) = shape {
        return Err(Error::Invalid("input size must be positive".into()));
    }
    for (i, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let bad = |why: &str| Err(Error::Invalid(format!("layer {i} (`{spec}`): {why}")));
        shape = match (*spec, shape) {
            (LayerSpec::Embedding { dim, .. }, S::Tokens(len)) => S::Seq(len, dim),
            (LayerSpec::Embedding { .. }, _) => return bad("embedding must consume token input"),
            (_, S::Tokens(_)) => return bad("token input must go through an embedding first"),
            (LayerSpec::Conv1d { kernel, filters, .. }, S::Seq(len, _)) => {
                if len < kernel {
                    return Err(Error::SequenceTooShort { len, kernel });
                }
                S::Seq(len - kernel + 1, filters)
            }
            (LayerSpec::Conv1d { .. }, _) => return bad("conv1d needs a sequence input"),
            (LayerSpec::GlobalMaxPool, S::Seq(_, c)) => S::Flat(c),
            (LayerSpec::GlobalMaxPool, _) => return bad("pooling needs a sequence input"),
            (LayerSpec::Dense { units, .. }, S::Flat(_)) => S::Flat(units),
            (LayerSpec::Dense { .. }, _) => return bad("dense needs a flat input"),
            (LayerSpec::Dropout { .. }, s) => s,
        };
    }
    Ok(())
}
