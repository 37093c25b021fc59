//! Feed-forward networks mapping nodal conductivity to nodal temperature.
//!
//! Two layouts share one implementation:
//!
//! - **separate**: one small sub-network per output node, each reading the
//!   full conductivity vector and producing a single temperature;
//! - **monolithic**: a single fully connected network whose hidden layers
//!   are as wide as all sub-networks together.
//!
//! Internally a layer is a set of independent dense blocks ("groups"). The
//! first layer of the separate layout reads the shared input, so all of its
//! sub-network blocks stack into one dense matrix; deeper layers are
//! block-diagonal. Block products go through `matrixmultiply`, except for
//! batches of at most four rows, which use a direct loop.
//!
//! Parameters live in one flat vector so the optimiser, gradient checks and
//! checkpoints can treat them uniformly.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FolError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Tanh,
    Swish,
    Sigmoid,
    Linear,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Tanh,
        ActivationKind::Swish,
        ActivationKind::Sigmoid,
        ActivationKind::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Tanh => "tanh",
            ActivationKind::Swish => "swish",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = FolError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(ActivationKind::Tanh),
            "swish" => Ok(ActivationKind::Swish),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "linear" => Ok(ActivationKind::Linear),
            other => Err(FolError::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activation value. Swish uses `beta = 1`.
pub fn activation(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Tanh => x.tanh(),
        ActivationKind::Swish => x * logistic(x),
        ActivationKind::Sigmoid => logistic(x),
        ActivationKind::Linear => x,
    }
}

/// Exact derivative of [`activation`] with respect to its argument.
pub fn activation_grad(kind: ActivationKind, x: f64) -> f64 {
    match kind {
        ActivationKind::Tanh => {
            let t = x.tanh();
            1.0 - t * t
        }
        ActivationKind::Swish => {
            let s = logistic(x);
            s + x * s * (1.0 - s)
        }
        ActivationKind::Sigmoid => {
            let s = logistic(x);
            s * (1.0 - s)
        }
        ActivationKind::Linear => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkMode {
    Separate,
    Monolithic,
}

impl std::str::FromStr for NetworkMode {
    type Err = FolError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "separate" => Ok(NetworkMode::Separate),
            "monolithic" => Ok(NetworkMode::Monolithic),
            other => Err(FolError::invalid(format!("unknown network mode '{other}'"))),
        }
    }
}

/// Network shape. `hidden_width` is the width of one sub-network; in
/// monolithic mode the hidden layers are `nodes * hidden_width` wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub nodes: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub activation: ActivationKind,
    pub mode: NetworkMode,
}

impl Architecture {
    /// Two hidden layers of ten neurons per sub-network.
    pub fn separate(nodes: usize, activation: ActivationKind) -> Self {
        Architecture {
            nodes,
            hidden_width: 10,
            hidden_layers: 2,
            activation,
            mode: NetworkMode::Separate,
        }
    }

    /// Same neuron budget as [`Architecture::separate`] in one dense network.
    pub fn monolithic(nodes: usize, activation: ActivationKind) -> Self {
        Architecture {
            mode: NetworkMode::Monolithic,
            ..Self::separate(nodes, activation)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(FolError::invalid("network needs at least one node"));
        }
        if self.hidden_layers > 0 && self.hidden_width == 0 {
            return Err(FolError::invalid("hidden layers need a positive width"));
        }
        Ok(())
    }

    /// Number of independent sub-networks.
    pub fn subnets(&self) -> usize {
        match self.mode {
            NetworkMode::Separate => self.nodes,
            NetworkMode::Monolithic => 1,
        }
    }

    /// Layer widths of one sub-network, input first.
    pub fn subnet_widths(&self) -> Vec<usize> {
        let (hidden, out) = match self.mode {
            NetworkMode::Separate => (self.hidden_width, 1),
            NetworkMode::Monolithic => (self.nodes * self.hidden_width, self.nodes),
        };
        let mut w = vec![self.nodes];
        w.extend(std::iter::repeat_n(hidden, self.hidden_layers));
        w.push(out);
        w
    }
}

/// One layer as `groups` independent dense blocks of `fan_out x fan_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub groups: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub w_offset: usize,
    pub b_offset: usize,
}

impl LayerShape {
    pub fn width_in(&self) -> usize {
        self.groups * self.fan_in
    }

    pub fn width_out(&self) -> usize {
        self.groups * self.fan_out
    }

    fn weight_len(&self) -> usize {
        self.groups * self.fan_out * self.fan_in
    }
}

fn layer_shapes(arch: &Architecture) -> Vec<LayerShape> {
    let widths = arch.subnet_widths();
    let s = arch.subnets();
    let mut shapes = Vec::with_capacity(widths.len() - 1);
    let mut offset = 0;
    for l in 0..widths.len() - 1 {
        // The first layer reads the shared input: stack all sub-networks.
        let (groups, fan_out) = if l == 0 { (1, s * widths[1]) } else { (s, widths[l + 1]) };
        let mut shape = LayerShape {
            groups,
            fan_in: widths[l],
            fan_out,
            w_offset: offset,
            b_offset: 0,
        };
        offset += shape.weight_len();
        shape.b_offset = offset;
        offset += shape.width_out();
        shapes.push(shape);
    }
    shapes
}

/// Weights and biases of every sub-network, flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    layers: Vec<LayerShape>,
    pub data: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = layer_shapes(&arch);
        let len = layers.last().map(|l| l.b_offset + l.width_out()).unwrap_or(0);
        Ok(NetworkParams {
            arch,
            layers,
            data: vec![0.0; len],
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.arch.nodes
    }

    pub fn n_outputs(&self) -> usize {
        self.arch.nodes
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Flat index ranges of sub-network `s` as `(weights, biases)` per layer.
    pub fn subnet_ranges(&self, s: usize) -> Vec<(Range<usize>, Range<usize>)> {
        let widths = self.arch.subnet_widths();
        self.layers
            .iter()
            .enumerate()
            .map(|(l, shape)| {
                let (rows, cols) = (widths[l + 1], widths[l]);
                let w0 = shape.w_offset + s * rows * cols;
                let b0 = shape.b_offset + s * rows;
                (w0..w0 + rows * cols, b0..b0 + rows)
            })
            .collect()
    }

    /// All flat indices belonging to sub-network `s`.
    pub fn subnet_indices(&self, s: usize) -> Vec<usize> {
        self.subnet_ranges(s)
            .into_iter()
            .flat_map(|(w, b)| w.chain(b))
            .collect()
    }
}

/// Glorot-uniform weights, zero biases. Each sub-network layer draws from its
/// own stream keyed by `(seed, subnet, layer)`.
pub fn init_params(arch: Architecture, seed: u64) -> Result<NetworkParams> {
    let mut params = NetworkParams::zeros(arch)?;
    let widths = arch.subnet_widths();
    for s in 0..arch.subnets() {
        for (l, (w, _)) in params.subnet_ranges(s).into_iter().enumerate() {
            let bound = (6.0 / (widths[l] + widths[l + 1]) as f64).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((s as u64) << 16) | l as u64);
            for v in &mut params.data[w] {
                *v = rng.random_range(-bound..=bound);
            }
        }
    }
    Ok(params)
}

/// C = alpha * A B + beta * C with explicit strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rs: usize, cs: usize, r: usize, c: usize| (r - 1) * rs + (c - 1) * cs;
    if k > 0 {
        assert!(a.len() > last(rsa, csa, m, k));
        assert!(b.len() > last(rsb, csb, k, n));
    }
    assert!(c.len() > last(rsc, csc, m, n));
    if m <= 4 {
        for i in 0..m {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..k {
                    acc += a[i * rsa + p * csa] * b[p * rsb + j * csb];
                }
                let cij = &mut c[i * rsc + j * csc];
                *cij = if beta == 0.0 { acc } else { beta * *cij + acc };
            }
        }
        return;
    }
    // SAFETY: the asserts above bound every element the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Activation caches for one batch; reused across steps.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    batch: usize,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn resize(&mut self, params: &NetworkParams, batch: usize) {
        self.batch = batch;
        self.pre.resize(params.layers.len(), Vec::new());
        self.post.resize(params.layers.len(), Vec::new());
        for (l, shape) in params.layers.iter().enumerate() {
            self.pre[l].resize(batch * shape.width_out(), 0.0);
            self.post[l].resize(batch * shape.width_out(), 0.0);
        }
    }

    /// Forward a row-major `batch x nodes` input; returns `batch x nodes`.
    pub fn forward(&mut self, params: &NetworkParams, input: &[f64], batch: usize) -> &[f64] {
        assert_eq!(input.len(), batch * params.n_inputs());
        self.resize(params, batch);
        let act = params.arch.activation;
        let n_layers = params.layers.len();
        for (l, shape) in params.layers.iter().enumerate() {
            let (done, rest) = self.post.split_at_mut(l);
            let source: &[f64] = if l == 0 { input } else { &done[l - 1] };
            let z = &mut self.pre[l];
            let bias = &params.data[shape.b_offset..shape.b_offset + shape.width_out()];
            for row in z.chunks_exact_mut(shape.width_out()) {
                row.copy_from_slice(bias);
            }
            let (wi, wo) = (shape.width_in(), shape.width_out());
            for g in 0..shape.groups {
                let w0 = shape.w_offset + g * shape.fan_out * shape.fan_in;
                gemm(
                    batch,
                    shape.fan_in,
                    shape.fan_out,
                    &source[g * shape.fan_in..],
                    (wi, 1),
                    &params.data[w0..w0 + shape.fan_out * shape.fan_in],
                    (1, shape.fan_in),
                    1.0,
                    &mut z[g * shape.fan_out..],
                    (wo, 1),
                );
            }
            let a = &mut rest[0];
            if l + 1 == n_layers {
                a.copy_from_slice(z);
            } else {
                for (o, &v) in a.iter_mut().zip(z.iter()) {
                    *o = activation(act, v);
                }
            }
        }
        &self.post[n_layers - 1]
    }

    /// Accumulate parameter gradients into `grad` given `dL/dT` for the batch
    /// last passed to [`Workspace::forward`]. `input` must be that same batch.
    pub fn backward(&mut self, params: &NetworkParams, input: &[f64], upstream: &[f64], grad: &mut [f64]) {
        let batch = self.batch;
        assert_eq!(upstream.len(), batch * params.n_outputs());
        assert_eq!(grad.len(), params.len());
        let act = params.arch.activation;
        self.delta.clear();
        self.delta.extend_from_slice(upstream);
        for (l, shape) in params.layers.iter().enumerate().rev() {
            let source: &[f64] = if l == 0 { input } else { &self.post[l - 1] };
            let (wi, wo) = (shape.width_in(), shape.width_out());
            let (fi, fo) = (shape.fan_in, shape.fan_out);
            for g in 0..shape.groups {
                let w0 = shape.w_offset + g * fo * fi;
                // dW_g += delta_g^T * source_g
                gemm(
                    fo,
                    batch,
                    fi,
                    &self.delta[g * fo..],
                    (1, wo),
                    &source[g * fi..],
                    (wi, 1),
                    1.0,
                    &mut grad[w0..w0 + fo * fi],
                    (fi, 1),
                );
            }
            let gb = &mut grad[shape.b_offset..shape.b_offset + wo];
            for row in self.delta.chunks_exact(wo) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 {
                break;
            }
            self.delta_prev.clear();
            self.delta_prev.resize(batch * wi, 0.0);
            for g in 0..shape.groups {
                let w0 = shape.w_offset + g * fo * fi;
                // d(source)_g = delta_g * W_g
                gemm(
                    batch,
                    fo,
                    fi,
                    &self.delta[g * fo..],
                    (wo, 1),
                    &params.data[w0..w0 + fo * fi],
                    (fi, 1),
                    0.0,
                    &mut self.delta_prev[g * fi..],
                    (wi, 1),
                );
            }
            for (d, &z) in self.delta_prev.iter_mut().zip(&self.pre[l - 1]) {
                *d *= activation_grad(act, z);
            }
            std::mem::swap(&mut self.delta, &mut self.delta_prev);
        }
    }
}

fn check_input(params: &NetworkParams, k: &[f64]) -> Result<()> {
    if k.len() != params.n_inputs() {
        return Err(FolError::mismatch(format!(
            "network expects {} inputs, got {}",
            params.n_inputs(),
            k.len()
        )));
    }
    if let Some(i) = k.iter().position(|v| !v.is_finite()) {
        return Err(FolError::invalid(format!("input {i} is not finite")));
    }
    Ok(())
}

/// Predicted nodal temperatures for one conductivity field.
pub fn forward(params: &NetworkParams, k: &[f64]) -> Result<Vec<f64>> {
    check_input(params, k)?;
    Ok(Workspace::new().forward(params, k, 1).to_vec())
}

/// Forward a batch of fields; output rows follow input order.
pub fn forward_batch(params: &NetworkParams, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let mut flat = Vec::with_capacity(inputs.len() * params.n_inputs());
    for k in inputs {
        check_input(params, k)?;
        flat.extend_from_slice(k);
    }
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let out = Workspace::new().forward(params, &flat, inputs.len()).to_vec();
    Ok(out.chunks(params.n_outputs()).map(<[f64]>::to_vec).collect())
}

/// Gradient of a scalar loss with respect to every parameter, given
/// `upstream = dL/dT` for a single input.
pub fn backprop(params: &NetworkParams, k: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
    check_input(params, k)?;
    if upstream.len() != params.n_outputs() {
        return Err(FolError::mismatch(format!(
            "upstream gradient has {} entries, expected {}",
            upstream.len(),
            params.n_outputs()
        )));
    }
    if upstream.iter().any(|v| !v.is_finite()) {
        return Err(FolError::numerical("upstream gradient is not finite"));
    }
    let mut ws = Workspace::new();
    ws.forward(params, k, 1);
    let mut grad = vec![0.0; params.len()];
    ws.backward(params, k, upstream, &mut grad);
    Ok(grad)
}

/// Serialised form of [`NetworkParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub mode: NetworkMode,
    pub activation: ActivationKind,
    /// `[nodes, hidden_width, hidden_layers]`
    pub arch: [usize; 3],
    pub subnets: Vec<SubnetParams>,
}

/// Per-layer weight matrices (rows = outputs) and bias vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubnetParams {
    #[serde(rename = "W")]
    pub weights: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
}

pub const CHECKPOINT_FORMAT: u32 = 1;

impl From<&NetworkParams> for Checkpoint {
    fn from(p: &NetworkParams) -> Self {
        let widths = p.arch.subnet_widths();
        let subnets = (0..p.arch.subnets())
            .map(|s| {
                let mut sp = SubnetParams {
                    weights: Vec::new(),
                    b: Vec::new(),
                };
                for (l, (w, b)) in p.subnet_ranges(s).into_iter().enumerate() {
                    sp.weights
                        .push(p.data[w].chunks(widths[l]).map(<[f64]>::to_vec).collect());
                    sp.b.push(p.data[b].to_vec());
                }
                sp
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            mode: p.arch.mode,
            activation: p.arch.activation,
            arch: [p.arch.nodes, p.arch.hidden_width, p.arch.hidden_layers],
            subnets,
        }
    }
}

impl TryFrom<&Checkpoint> for NetworkParams {
    type Error = FolError;

    fn try_from(c: &Checkpoint) -> Result<Self> {
        if c.format != CHECKPOINT_FORMAT {
            return Err(FolError::invalid(format!("unsupported checkpoint format {}", c.format)));
        }
        let arch = Architecture {
            nodes: c.arch[0],
            hidden_width: c.arch[1],
            hidden_layers: c.arch[2],
            activation: c.activation,
            mode: c.mode,
        };
        let mut p = NetworkParams::zeros(arch)?;
        if c.subnets.len() != arch.subnets() {
            return Err(FolError::mismatch(format!(
                "checkpoint has {} sub-networks, architecture needs {}",
                c.subnets.len(),
                arch.subnets()
            )));
        }
        let widths = arch.subnet_widths();
        for (s, sp) in c.subnets.iter().enumerate() {
            let ranges = p.subnet_ranges(s);
            if sp.weights.len() != ranges.len() || sp.b.len() != ranges.len() {
                return Err(FolError::mismatch(format!("sub-network {s}: wrong layer count")));
            }
            for (l, (w, b)) in ranges.into_iter().enumerate() {
                let rows = &sp.weights[l];
                if rows.len() != widths[l + 1]
                    || rows.iter().any(|r| r.len() != widths[l])
                    || sp.b[l].len() != widths[l + 1]
                {
                    return Err(FolError::mismatch(format!(
                        "sub-network {s} layer {l}: shape does not match the architecture"
                    )));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                p.data[w].copy_from_slice(&flat);
                p.data[b].copy_from_slice(&sp.b[l]);
            }
        }
        if !p.is_finite() {
            return Err(FolError::invalid("checkpoint contains non-finite parameters"));
        }
        Ok(p)
    }
}
