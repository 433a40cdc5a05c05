//! Central finite-difference checks of every layer kind's backward pass.
//!
//! Each check builds a small random configuration, evaluates a scalar
//! objective with forward passes only, and compares the numeric derivative of
//! every parameter (and feature input) with the analytic gradient. ReLU kinks
//! and max-pool ties are avoided by redrawing any configuration whose
//! pre-activations or pool margins come within [`KINK_MARGIN`] of a
//! non-differentiable point.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng::{self, StreamRng};
use crate::text_prep::PAD;

use super::loss::{multilabel_xent, multilabel_xent_grad};
use super::network::{Input, InputShape, Network};
use super::{ops, Activation, Layer, LayerSpec, Tensor};

pub const EPSILON: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Relative errors are measured against `max(|analytic|, |numeric|, DENOM_FLOOR)`.
pub const DENOM_FLOOR: f64 = 1e-6;
pub const KINK_MARGIN: f64 = 1e-3;

pub const KINDS: [&str; 10] = [
    "embedding",
    "conv1d",
    "global_max_pool",
    "dense_relu",
    "dense_sigmoid",
    "dense_tanh",
    "dropout",
    "multilabel_xent",
    "text_cnn",
    "policy_mlp",
];

#[derive(Debug, Clone, Copy)]
pub struct GradcheckOptions {
    pub seed: u64,
    /// Random configurations per kind.
    pub configs: usize,
    /// Negative control: perturb one analytic entry per configuration.
    pub corrupt: bool,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            seed: 0,
            configs: 20,
            corrupt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindReport {
    pub kind: &'static str,
    pub configs: usize,
    /// Scalar derivatives compared.
    pub checked: usize,
    pub worst: f64,
}

impl KindReport {
    pub fn passed(&self) -> bool {
        self.worst < TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOM_FLOOR)
}

pub fn run_suite(opts: &GradcheckOptions) -> Vec<KindReport> {
    KINDS.iter().map(|&kind| check_kind(kind, opts)).collect()
}

pub fn check_kind(kind: &'static str, opts: &GradcheckOptions) -> KindReport {
    let mut rng = rng::stream(opts.seed, &format!("gradcheck/{kind}"));
    let mut report = KindReport {
        kind,
        configs: 0,
        checked: 0,
        worst: 0.0,
    };
    while report.configs < opts.configs {
        let mut cmp = Comparison::default();
        if kind == "multilabel_xent" {
            check_loss(&mut rng, &mut cmp, opts.corrupt);
        } else {
            let Some(probe) = draw(kind, &mut rng) else {
                continue;
            };
            probe.compare(&mut cmp, opts.corrupt);
        }
        report.configs += 1;
        report.checked += cmp.checked;
        report.worst = report.worst.max(cmp.worst);
    }
    report
}

#[derive(Default)]
struct Comparison {
    checked: usize,
    worst: f64,
    corrupted: bool,
}

impl Comparison {
    fn push(&mut self, mut analytic: f64, numeric: f64, corrupt: bool) {
        if corrupt && !self.corrupted {
            analytic += 1e-2 * (1.0 + analytic.abs());
            self.corrupted = true;
        }
        self.checked += 1;
        self.worst = self.worst.max(relative_error(analytic, numeric));
    }

    /// Entries that must carry exactly zero gradient (frozen padding row).
    fn push_zero(&mut self, analytic: f64) {
        self.checked += 1;
        if analytic != 0.0 {
            self.worst = f64::INFINITY;
        }
    }
}

enum Objective {
    /// `r . output`
    Projection(Vec<f64>),
    /// Summed binary cross-entropy against a target, differentiated through the
    /// fused sigmoid path used in training.
    Xent(Vec<f64>),
}

struct Probe {
    net: Network,
    tokens: Vec<usize>,
    features: Vec<f64>,
    objective: Objective,
    /// Dropout stream state; cloned for each evaluation so the mask is fixed.
    dropout: Option<StreamRng>,
}

impl Probe {
    fn input(&self) -> Input<'_> {
        match self.net.input_shape() {
            InputShape::Tokens { .. } => Input::Tokens(&self.tokens),
            InputShape::Features { .. } => Input::Features(&self.features),
        }
    }

    fn loss_of(&self, net: &Network, features: &[f64]) -> f64 {
        let input = match net.input_shape() {
            InputShape::Tokens { .. } => Input::Tokens(&self.tokens),
            InputShape::Features { .. } => Input::Features(features),
        };
        let mut dropout = self.dropout.clone();
        let out = net.forward(input, dropout.as_mut()).expect("probe shapes are valid").output;
        match &self.objective {
            Objective::Projection(r) => out.iter().zip(r).map(|(a, b)| a * b).sum(),
            Objective::Xent(y) => multilabel_xent(&out, y),
        }
    }

    fn compare(&self, cmp: &mut Comparison, corrupt: bool) {
        let mut dropout = self.dropout.clone();
        let trace = self.net.forward(self.input(), dropout.as_mut()).expect("probe shapes are valid");
        let (grad_out, pre) = match &self.objective {
            Objective::Projection(r) => (r.clone(), false),
            Objective::Xent(y) => (trace.output.iter().zip(y).map(|(p, t)| p - t).collect(), true),
        };
        let mut grads = self.net.zero_gradients();
        let dx = self.net.backward(&trace, &grad_out, pre, &mut grads);

        let pad_row = match self.net.layers().first() {
            Some(Layer::Embedding { dim, .. }) => Some(*dim),
            _ => None,
        };
        let mut work = self.net.clone();
        for (a, g) in grads.arrays.iter().enumerate() {
            for j in 0..g.len() {
                if a == 0 && pad_row.is_some_and(|dim| j / dim == PAD) {
                    cmp.push_zero(g[j]);
                    continue;
                }
                let orig = work.params()[a][j];
                work.params_mut()[a][j] = orig + EPSILON;
                let up = self.loss_of(&work, &self.features);
                work.params_mut()[a][j] = orig - EPSILON;
                let down = self.loss_of(&work, &self.features);
                work.params_mut()[a][j] = orig;
                cmp.push(g[j], (up - down) / (2.0 * EPSILON), corrupt);
            }
        }
        if let (Some(dx), InputShape::Features { .. }) = (dx, self.net.input_shape()) {
            let mut x = self.features.clone();
            for j in 0..x.len() {
                let orig = x[j];
                x[j] = orig + EPSILON;
                let up = self.loss_of(&self.net, &x);
                x[j] = orig - EPSILON;
                let down = self.loss_of(&self.net, &x);
                x[j] = orig;
                cmp.push(dx[j], (up - down) / (2.0 * EPSILON), corrupt);
            }
        }
    }
}

fn uniform(rng: &mut StreamRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Distinct non-padding indices, so embedding rows never tie exactly.
fn distinct_tokens(rng: &mut StreamRng, vocab: usize, len: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (1..vocab).collect();
    pool.shuffle(rng);
    pool.truncate(len);
    pool
}

fn pool_margin_ok(x: &Tensor) -> bool {
    (0..x.cols()).all(|c| {
        let mut col: Vec<f64> = (0..x.rows()).map(|t| x.row(t)[c]).collect();
        col.sort_by(|a, b| b.total_cmp(a));
        col.len() < 2 || col[0] - col[1] > KINK_MARGIN
    })
}

fn preactivations_clear(z: &[f64]) -> bool {
    z.iter().all(|v| v.abs() > KINK_MARGIN)
}

fn draw(kind: &str, rng: &mut StreamRng) -> Option<Probe> {
    let seed: u64 = rng.gen();
    let probe = match kind {
        "embedding" => {
            let (vocab, dim, len) = (rng.gen_range(3..8), rng.gen_range(1..4), rng.gen_range(1..6));
            let net = Network::new(
                InputShape::Tokens { len },
                &[LayerSpec::Embedding { vocab, dim }],
                seed,
            )
            .ok()?;
            // Padding may appear here; its row must receive no gradient.
            let tokens = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
            Probe {
                objective: Objective::Projection(uniform(rng, len * dim, -1.0, 1.0)),
                net,
                tokens,
                features: vec![],
                dropout: None,
            }
        }
        "conv1d" => {
            let kernel = rng.gen_range(1..4);
            let len = kernel + rng.gen_range(0..4);
            let (vocab, dim, filters) = (len + 2, rng.gen_range(1..4), rng.gen_range(1..4));
            let activation = *[Activation::Relu, Activation::Tanh, Activation::Identity].choose(rng)?;
            let net = Network::new(
                InputShape::Tokens { len },
                &[
                    LayerSpec::Embedding { vocab, dim },
                    LayerSpec::Conv1d { kernel, filters, activation },
                ],
                seed,
            )
            .ok()?;
            let tokens = distinct_tokens(rng, vocab, len);
            if activation == Activation::Relu {
                let (Layer::Embedding { table, .. }, Layer::Conv1d { weights, bias, .. }) =
                    (&net.layers()[0], &net.layers()[1])
                else {
                    unreachable!()
                };
                let x = ops::embedding_forward(&tokens, table, dim).ok()?;
                let z = ops::conv1d_forward(&x, kernel, filters, weights, bias).ok()?;
                if !preactivations_clear(z.data()) {
                    return None;
                }
            }
            let out_len = (len - kernel + 1) * filters;
            Probe {
                objective: Objective::Projection(uniform(rng, out_len, -1.0, 1.0)),
                net,
                tokens,
                features: vec![],
                dropout: None,
            }
        }
        "global_max_pool" => {
            let len = rng.gen_range(1..6);
            let (vocab, dim) = (len + 2, rng.gen_range(1..4));
            let net = Network::new(
                InputShape::Tokens { len },
                &[LayerSpec::Embedding { vocab, dim }, LayerSpec::GlobalMaxPool],
                seed,
            )
            .ok()?;
            let tokens = distinct_tokens(rng, vocab, len);
            let Layer::Embedding { table, .. } = &net.layers()[0] else {
                unreachable!()
            };
            if !pool_margin_ok(&ops::embedding_forward(&tokens, table, dim).ok()?) {
                return None;
            }
            Probe {
                objective: Objective::Projection(uniform(rng, dim, -1.0, 1.0)),
                net,
                tokens,
                features: vec![],
                dropout: None,
            }
        }
        "dense_relu" | "dense_sigmoid" | "dense_tanh" => {
            let activation = match kind {
                "dense_relu" => Activation::Relu,
                "dense_sigmoid" => Activation::Sigmoid,
                _ => Activation::Tanh,
            };
            let (n, m) = (rng.gen_range(1..6), rng.gen_range(1..6));
            let mut net = Network::new(
                InputShape::Features { dim: n },
                &[LayerSpec::Dense { units: m, activation }],
                seed,
            )
            .ok()?;
            if let Some(Layer::Dense { bias, .. }) = net.layers_mut().first_mut() {
                *bias = uniform(rng, m, -0.5, 0.5);
            }
            let features = uniform(rng, n, -2.0, 2.0);
            if activation == Activation::Relu {
                let p = net.params();
                let z = ops::dense_forward(&features, p[0], p[1], Activation::Identity).ok()?;
                if !preactivations_clear(&z) {
                    return None;
                }
            }
            Probe {
                objective: Objective::Projection(uniform(rng, m, -1.0, 1.0)),
                net,
                tokens: vec![],
                features,
                dropout: None,
            }
        }
        "dropout" => {
            let (n, m) = (rng.gen_range(1..6), rng.gen_range(2..8));
            let net = Network::new(
                InputShape::Features { dim: n },
                &[
                    LayerSpec::Dense { units: m, activation: Activation::Tanh },
                    LayerSpec::Dropout { rate: rng.gen_range(0.1..0.7) },
                ],
                seed,
            )
            .ok()?;
            Probe {
                objective: Objective::Projection(uniform(rng, m, -1.0, 1.0)),
                net,
                tokens: vec![],
                features: uniform(rng, n, -2.0, 2.0),
                dropout: Some(rng::stream(seed, rng::DROPOUT)),
            }
        }
        "text_cnn" => {
            let kernel = rng.gen_range(1..4);
            let len = kernel + rng.gen_range(1..4);
            let (vocab, dim, filters) = (len + 3, rng.gen_range(2..4), rng.gen_range(2..4));
            let labels = rng.gen_range(1..4);
            let net = Network::new(
                InputShape::Tokens { len },
                &[
                    LayerSpec::Embedding { vocab, dim },
                    LayerSpec::Conv1d { kernel, filters, activation: Activation::Tanh },
                    LayerSpec::GlobalMaxPool,
                    LayerSpec::Dense { units: 3, activation: Activation::Tanh },
                    LayerSpec::Dropout { rate: 0.5 },
                    LayerSpec::Dense { units: labels, activation: Activation::Sigmoid },
                ],
                seed,
            )
            .ok()?;
            let mut tokens = distinct_tokens(rng, vocab, len - 1);
            tokens.push(PAD);
            let trace = net.forward(Input::Tokens(&tokens), None).ok()?;
            if !trace.pool_inputs().into_iter().all(pool_margin_ok) {
                return None;
            }
            Probe {
                objective: Objective::Xent((0..labels).map(|_| f64::from(rng.gen_range(0..2u8))).collect()),
                net,
                tokens,
                features: vec![],
                dropout: Some(rng::stream(seed, rng::DROPOUT)),
            }
        }
        "policy_mlp" => {
            let (n, labels) = (rng.gen_range(2..7), rng.gen_range(1..4));
            let net = Network::new(
                InputShape::Features { dim: n },
                &[
                    LayerSpec::Dense { units: 5, activation: Activation::Sigmoid },
                    LayerSpec::Dense { units: 4, activation: Activation::Tanh },
                    LayerSpec::Dense { units: labels, activation: Activation::Sigmoid },
                ],
                seed,
            )
            .ok()?;
            Probe {
                objective: Objective::Xent((0..labels).map(|_| f64::from(rng.gen_range(0..2u8))).collect()),
                net,
                tokens: vec![],
                features: uniform(rng, n, 0.0, 1.0),
                dropout: None,
            }
        }
        other => panic!("unknown gradient-check kind `{other}`"),
    };
    Some(probe)
}

/// dL/dp of the loss itself, including soft targets.
fn check_loss(rng: &mut StreamRng, cmp: &mut Comparison, corrupt: bool) {
    let l = rng.gen_range(1..8);
    let p = uniform(rng, l, 0.02, 0.98);
    let y: Vec<f64> = (0..l)
        .map(|_| if rng.gen_bool(0.5) { f64::from(rng.gen_range(0..2u8)) } else { rng.gen_range(0.0..1.0) })
        .collect();
    let g = multilabel_xent_grad(&p, &y);
    let mut q = p.clone();
    for j in 0..l {
        q[j] = p[j] + EPSILON;
        let up = multilabel_xent(&q, &y);
        q[j] = p[j] - EPSILON;
        let down = multilabel_xent(&q, &y);
        q[j] = p[j];
        cmp.push(g[j], (up - down) / (2.0 * EPSILON), corrupt);
    }
}
