//! Physics-informed and supervised training of the operator networks.
//!
//! The physics loss is the discretised energy form of the heat equation,
//! evaluated element by element with precomputed shape-function products,
//! plus an absolute-value penalty on the Dirichlet nodes:
//!
//! ```text
//! L = lambda_e * sum_e T_e^T [ sum_n (N(xi_n) . k_e) B(xi_n)^T B(xi_n) ] T_e
//!   + lambda_b * sum_i |T_i - T_i,db|
//! ```
//!
//! with `lambda_e = (w_n / 2) det J`. No labels are involved; the supervised
//! baseline instead fits finite element solutions with a nodal MSE.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FolError, Result};
use crate::fem::{BoundaryConditions, TemperatureField};
use crate::mesh::{element_operators, GaussRule, Mesh};
use crate::microstructure::ConductivityField;
use crate::neural::{init_params, ActivationKind, Architecture, NetworkMode, NetworkParams, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingMode {
    /// Energy loss on unlabeled conductivity fields.
    Physics,
    /// Nodal MSE against finite element labels.
    Data,
}

impl std::str::FromStr for TrainingMode {
    type Err = FolError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "physics" => Ok(TrainingMode::Physics),
            "data" => Ok(TrainingMode::Data),
            other => Err(FolError::invalid(format!("unknown training mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub mode: TrainingMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Dirichlet penalty weight.
    pub lambda_b: f64,
    pub seed: u64,
    pub activation: ActivationKind,
    pub network: NetworkMode,
    /// Neurons per hidden layer of one sub-network.
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub shuffle: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            mode: TrainingMode::Physics,
            epochs: 5000,
            batch_size: 100,
            adam: AdamConfig::default(),
            lambda_b: 10.0,
            seed: 42,
            activation: ActivationKind::Tanh,
            network: NetworkMode::Separate,
            hidden_width: 10,
            hidden_layers: 2,
            shuffle: true,
        }
    }
}

impl TrainingConfig {
    pub fn architecture(&self, nodes: usize) -> Architecture {
        Architecture {
            nodes,
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            activation: self.activation,
            mode: self.network,
        }
    }

    pub fn validate(&self, dataset_size: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > dataset_size {
            return Err(FolError::invalid(format!(
                "batch size {} must be in 1..={dataset_size}",
                self.batch_size
            )));
        }
        if self.lambda_b.is_nan() || self.lambda_b <= 0.0 {
            return Err(FolError::invalid("lambda_b must be positive"));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.epsilon > 0.0)
        {
            return Err(FolError::invalid("invalid Adam hyperparameters"));
        }
        Ok(())
    }
}

/// Shape-function products shared by every element of a uniform mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedLossOperators {
    /// `N_T(xi_n)` per Gauss point.
    pub shape_rows: Vec<[f64; 4]>,
    /// `B_T(xi_n)^T B_T(xi_n)` per Gauss point.
    pub btb: Vec<[[f64; 4]; 4]>,
    /// `(w_n / 2) det J`.
    pub lambda_e: f64,
    pub elements: Vec<[usize; 4]>,
    pub dirichlet: Vec<(usize, f64)>,
    pub n_nodes: usize,
}

pub fn precompute_loss_operators(
    mesh: &Mesh,
    rule: &GaussRule,
    bc: &BoundaryConditions,
) -> Result<PrecomputedLossOperators> {
    bc.validate(mesh.n_nodes())?;
    let w0 = rule.weights[0];
    if rule.weights.iter().any(|&w| w != w0) {
        return Err(FolError::invalid("loss operators need equal Gauss weights"));
    }
    let ops = element_operators(mesh, 0, rule)?;
    let det = ops.det_j[0];
    if ops.det_j.iter().any(|&d| (d - det).abs() > 1e-14 * det) {
        return Err(FolError::invalid("loss operators need a constant Jacobian"));
    }
    let btb = ops
        .b_matrices
        .iter()
        .map(|b| {
            let mut m = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] = b[0][i] * b[0][j] + b[1][i] * b[1][j];
                }
            }
            m
        })
        .collect();
    Ok(PrecomputedLossOperators {
        shape_rows: ops.shape_values,
        btb,
        lambda_e: 0.5 * w0 * det,
        elements: mesh.elements().to_vec(),
        dirichlet: bc.dirichlet.clone(),
        n_nodes: mesh.n_nodes(),
    })
}

impl PrecomputedLossOperators {
    /// `sum_n (N(xi_n) . k_e) B^T B` for one element.
    pub fn element_matrix(&self, k_e: &[f64; 4]) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for (n_t, btb) in self.shape_rows.iter().zip(&self.btb) {
            let k_at: f64 = (0..4).map(|i| n_t[i] * k_e[i]).sum();
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] += k_at * btb[i][j];
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub energy: f64,
    pub dirichlet: f64,
    pub total: f64,
}

/// Physics loss of one temperature field; adds `dL/dT * scale` into `grad`.
fn physics_loss_into(
    t: &[f64],
    k: &[f64],
    ops: &PrecomputedLossOperators,
    lambda_b: f64,
    grad: &mut [f64],
    scale: f64,
) -> LossTerms {
    let mut energy = 0.0;
    for nodes in &ops.elements {
        let k_e = nodes.map(|n| k[n]);
        let t_e = nodes.map(|n| t[n]);
        let m = ops.element_matrix(&k_e);
        for i in 0..4 {
            let mt: f64 = (0..4).map(|j| m[i][j] * t_e[j]).sum();
            energy += t_e[i] * mt;
            grad[nodes[i]] += scale * 2.0 * ops.lambda_e * mt;
        }
    }
    energy *= ops.lambda_e;
    let mut dirichlet = 0.0;
    for &(node, target) in &ops.dirichlet {
        let diff = t[node] - target;
        dirichlet += diff.abs();
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        grad[node] += scale * lambda_b * sign;
    }
    dirichlet *= lambda_b;
    LossTerms {
        energy,
        dirichlet,
        total: energy + dirichlet,
    }
}

/// Physics loss and its gradient with respect to the nodal temperatures.
pub fn physics_loss(
    t: &[f64],
    k: &[f64],
    ops: &PrecomputedLossOperators,
    lambda_b: f64,
) -> Result<(LossTerms, Vec<f64>)> {
    if t.len() != ops.n_nodes || k.len() != ops.n_nodes {
        return Err(FolError::mismatch(format!(
            "physics loss needs {} nodal values, got T={} k={}",
            ops.n_nodes,
            t.len(),
            k.len()
        )));
    }
    let mut grad = vec![0.0; ops.n_nodes];
    let terms = physics_loss_into(t, k, ops, lambda_b, &mut grad, 1.0);
    Ok((terms, grad))
}

fn data_loss_into(pred: &[f64], target: &[f64], grad: &mut [f64], scale: f64) -> f64 {
    let n = pred.len() as f64;
    let mut sum = 0.0;
    for ((g, p), y) in grad.iter_mut().zip(pred).zip(target) {
        let d = p - y;
        sum += d * d;
        *g += scale * 2.0 * d / n;
    }
    sum / n
}

/// Nodal mean squared error and its gradient.
pub fn data_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(FolError::mismatch(format!(
            "data loss needs equal non-empty lengths, got {} and {}",
            pred.len(),
            target.len()
        )));
    }
    let mut grad = vec![0.0; pred.len()];
    let loss = data_loss_into(pred, target, &mut grad, 1.0);
    Ok((loss, grad))
}

/// First and second moment estimates of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(FolError::mismatch("Adam parameter, gradient and state lengths differ"));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(FolError::numerical(format!("gradient {i} is not finite")));
    }
    state.step += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
    Ok(())
}

/// Per-epoch loss record. Terms are sample means over the epoch, taken
/// before each batch's update. In data mode `total` is the supervised MSE and
/// the energy/Dirichlet columns are diagnostics of the same predictions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub energy: Vec<f64>,
    pub dirichlet: Vec<f64>,
    pub total: Vec<f64>,
    /// Cumulative wall-clock seconds at the end of each epoch.
    pub seconds: Vec<f64>,
}

impl TrainingHistory {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    fn push(&mut self, terms: LossTerms, seconds: f64) {
        self.energy.push(terms.energy);
        self.dirichlet.push(terms.dirichlet);
        self.total.push(terms.total);
        self.seconds.push(seconds);
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub history: TrainingHistory,
}

/// Training stopped on a non-finite loss or gradient. `last_good` holds the
/// parameters at the end of the last finished epoch.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: FolError,
    pub epoch: usize,
    pub last_good: Box<TrainOutcome>,
}

impl std::fmt::Display for TrainFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training aborted in epoch {}: {}", self.epoch, self.error)
    }
}

impl std::error::Error for TrainFailure {}

impl From<TrainFailure> for FolError {
    fn from(f: TrainFailure) -> Self {
        match f.error {
            FolError::Numerical(msg) => FolError::Numerical(format!("epoch {}: {msg}", f.epoch)),
            other => other,
        }
    }
}

/// Samples per gradient chunk. Chunks are reduced in index order, so results
/// do not depend on the number of worker threads.
const CHUNK: usize = 16;

struct ChunkSlot {
    workspace: Workspace,
    input: Vec<f64>,
    upstream: Vec<f64>,
    grad: Vec<f64>,
    terms: LossTerms,
}

/// Training inputs. `labels` is only read in data mode.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub fields: &'a [ConductivityField],
    pub labels: Option<&'a [TemperatureField]>,
}

impl<'a> Dataset<'a> {
    pub fn unlabeled(fields: &'a [ConductivityField]) -> Self {
        Dataset { fields, labels: None }
    }

    pub fn labeled(fields: &'a [ConductivityField], labels: &'a [TemperatureField]) -> Self {
        Dataset {
            fields,
            labels: Some(labels),
        }
    }
}

/// Train from freshly initialised parameters.
pub fn train(
    dataset: Dataset<'_>,
    config: &TrainingConfig,
    mesh: &Mesh,
    bc: &BoundaryConditions,
) -> std::result::Result<TrainOutcome, TrainFailure> {
    train_with_observer(dataset, config, mesh, bc, |_, _| {})
}

/// [`train`], calling `observer(epoch, outcome_so_far)` after every epoch
/// (epochs counted from 1).
pub fn train_with_observer(
    dataset: Dataset<'_>,
    config: &TrainingConfig,
    mesh: &Mesh,
    bc: &BoundaryConditions,
    mut observer: impl FnMut(usize, &TrainOutcome),
) -> std::result::Result<TrainOutcome, TrainFailure> {
    let arch = config.architecture(mesh.n_nodes());
    let fail = |error: FolError| TrainFailure {
        error,
        epoch: 0,
        last_good: Box::new(TrainOutcome {
            params: NetworkParams::zeros(arch).unwrap_or_else(|_| unreachable_params()),
            history: TrainingHistory::default(),
        }),
    };
    let params = init_params(arch, config.seed).map_err(fail)?;
    let mut outcome = TrainOutcome {
        params,
        history: TrainingHistory::default(),
    };
    let early = |error: FolError, outcome: &TrainOutcome| TrainFailure {
        error,
        epoch: 0,
        last_good: Box::new(outcome.clone()),
    };
    let n = dataset.fields.len();
    let n_nodes = mesh.n_nodes();
    if n == 0 {
        return Err(early(FolError::invalid("dataset is empty"), &outcome));
    }
    if let Some(f) = dataset.fields.iter().position(|f| f.len() != n_nodes) {
        return Err(early(
            FolError::mismatch(format!("sample {f} does not match the {n_nodes}-node mesh")),
            &outcome,
        ));
    }
    if let Err(e) = config.validate(n) {
        return Err(early(e, &outcome));
    }
    let labels = match config.mode {
        TrainingMode::Physics => None,
        TrainingMode::Data => {
            let labels = match dataset.labels {
                Some(l) => l,
                None => return Err(early(FolError::mismatch("data mode needs labels"), &outcome)),
            };
            if labels.len() != n || labels.iter().any(|l| l.values.len() != n_nodes) {
                return Err(early(
                    FolError::mismatch(format!("{} labels for {n} samples", labels.len())),
                    &outcome,
                ));
            }
            Some(labels)
        }
    };
    if config.epochs == 0 {
        return Ok(outcome);
    }
    let ops = precompute_loss_operators(mesh, &GaussRule::two_by_two(), bc).map_err(|e| early(e, &outcome))?;

    let mut adam = AdamState::new(outcome.params.len());
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffler = ChaCha8Rng::seed_from_u64(config.seed);
    shuffler.set_stream(u64::MAX);
    let max_chunks = config.batch_size.div_ceil(CHUNK);
    let mut slots: Vec<ChunkSlot> = (0..max_chunks)
        .map(|_| ChunkSlot {
            workspace: Workspace::new(),
            input: Vec::new(),
            upstream: Vec::new(),
            grad: vec![0.0; outcome.params.len()],
            terms: LossTerms::default(),
        })
        .collect();
    let mut grad = vec![0.0; outcome.params.len()];
    let mut last_good = outcome.clone();
    let start = Instant::now();

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffler);
        }
        let mut epoch_terms = LossTerms::default();
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let params = &outcome.params;
            let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
            slots[..chunks.len()]
                .par_iter_mut()
                .zip(chunks.par_iter())
                .for_each(|(slot, idx)| run_chunk(slot, idx, params, dataset.fields, labels, &ops, config, scale));
            grad.iter_mut().for_each(|g| *g = 0.0);
            for slot in &slots[..chunks.len()] {
                for (g, s) in grad.iter_mut().zip(&slot.grad) {
                    *g += s;
                }
                epoch_terms.energy += slot.terms.energy;
                epoch_terms.dirichlet += slot.terms.dirichlet;
                epoch_terms.total += slot.terms.total;
            }
            if !epoch_terms.total.is_finite() {
                return Err(TrainFailure {
                    error: FolError::numerical("loss is not finite"),
                    epoch,
                    last_good: Box::new(last_good),
                });
            }
            if let Err(error) = adam_step(&mut outcome.params.data, &grad, &mut adam, &config.adam) {
                return Err(TrainFailure {
                    error,
                    epoch,
                    last_good: Box::new(last_good),
                });
            }
        }
        let inv = 1.0 / n as f64;
        let terms = LossTerms {
            energy: epoch_terms.energy * inv,
            dirichlet: epoch_terms.dirichlet * inv,
            total: epoch_terms.total * inv,
        };
        let seconds = start.elapsed().as_secs_f64();
        outcome.history.push(terms, seconds);
        if !outcome.params.is_finite() {
            return Err(TrainFailure {
                error: FolError::numerical("parameters are not finite"),
                epoch,
                last_good: Box::new(last_good),
            });
        }
        observer(epoch, &outcome);
        last_good.params.data.copy_from_slice(&outcome.params.data);
        last_good.history.push(terms, seconds);
    }
    Ok(outcome)
}

fn unreachable_params() -> NetworkParams {
    NetworkParams::zeros(Architecture::separate(1, ActivationKind::Linear)).expect("trivial architecture")
}

#[allow(clippy::too_many_arguments)]
fn run_chunk(
    slot: &mut ChunkSlot,
    idx: &[usize],
    params: &NetworkParams,
    fields: &[ConductivityField],
    labels: Option<&[TemperatureField]>,
    ops: &PrecomputedLossOperators,
    config: &TrainingConfig,
    scale: f64,
) {
    let n = params.n_inputs();
    slot.input.clear();
    for &i in idx {
        slot.input.extend_from_slice(fields[i].values());
    }
    let out = slot.workspace.forward(params, &slot.input, idx.len()).to_vec();
    slot.upstream.clear();
    slot.upstream.resize(out.len(), 0.0);
    slot.terms = LossTerms::default();
    let mut scratch = vec![0.0; n];
    for (s, &i) in idx.iter().enumerate() {
        let t = &out[s * n..(s + 1) * n];
        let up = &mut slot.upstream[s * n..(s + 1) * n];
        let k = fields[i].values();
        match labels {
            None => {
                let terms = physics_loss_into(t, k, ops, config.lambda_b, up, scale);
                slot.terms.energy += terms.energy;
                slot.terms.dirichlet += terms.dirichlet;
                slot.terms.total += terms.total;
            }
            Some(labels) => {
                let mse = data_loss_into(t, &labels[i].values, up, scale);
                scratch.iter_mut().for_each(|v| *v = 0.0);
                let terms = physics_loss_into(t, k, ops, config.lambda_b, &mut scratch, 0.0);
                slot.terms.energy += terms.energy;
                slot.terms.dirichlet += terms.dirichlet;
                slot.terms.total += mse;
            }
        }
    }
    slot.grad.iter_mut().for_each(|g| *g = 0.0);
    slot.workspace
        .backward(params, &slot.input, &slot.upstream, &mut slot.grad);
}

/// Mean loss over the whole of `dataset` and its gradient with respect to
/// every parameter, computed exactly as one training step would. In data
/// mode `total` is the mean squared error.
pub fn loss_and_gradient(
    params: &NetworkParams,
    dataset: Dataset<'_>,
    ops: &PrecomputedLossOperators,
    config: &TrainingConfig,
) -> Result<(LossTerms, Vec<f64>)> {
    let n = dataset.fields.len();
    if n == 0 {
        return Err(FolError::invalid("dataset is empty"));
    }
    if dataset.fields.iter().any(|f| f.len() != params.n_inputs()) || ops.n_nodes != params.n_outputs() {
        return Err(FolError::mismatch("dataset does not match the network"));
    }
    let labels = match config.mode {
        TrainingMode::Physics => None,
        TrainingMode::Data => match dataset.labels {
            Some(l) if l.len() == n && l.iter().all(|t| t.values.len() == ops.n_nodes) => Some(l),
            _ => return Err(FolError::mismatch("data mode needs one label per sample")),
        },
    };
    let order: Vec<usize> = (0..n).collect();
    let scale = 1.0 / n as f64;
    let mut slot = ChunkSlot {
        workspace: Workspace::new(),
        input: Vec::new(),
        upstream: Vec::new(),
        grad: vec![0.0; params.len()],
        terms: LossTerms::default(),
    };
    let mut grad = vec![0.0; params.len()];
    let mut sum = LossTerms::default();
    for idx in order.chunks(CHUNK) {
        run_chunk(&mut slot, idx, params, dataset.fields, labels, ops, config, scale);
        for (g, s) in grad.iter_mut().zip(&slot.grad) {
            *g += s;
        }
        sum.energy += slot.terms.energy;
        sum.dirichlet += slot.terms.dirichlet;
        sum.total += slot.terms.total;
    }
    Ok((
        LossTerms {
            energy: sum.energy * scale,
            dirichlet: sum.dirichlet * scale,
            total: sum.total * scale,
        },
        grad,
    ))
}

/// Mean loss terms of a parameter set over a dataset, without updating it.
pub fn evaluate_loss(
    params: &NetworkParams,
    fields: &[ConductivityField],
    ops: &PrecomputedLossOperators,
    lambda_b: f64,
) -> Result<LossTerms> {
    let mut sum = LossTerms::default();
    let mut ws = Workspace::new();
    let mut scratch = vec![0.0; ops.n_nodes];
    for f in fields {
        if f.len() != params.n_inputs() {
            return Err(FolError::mismatch("field length does not match the network"));
        }
        let t = ws.forward(params, f.values(), 1).to_vec();
        let terms = physics_loss_into(&t, f.values(), ops, lambda_b, &mut scratch, 0.0);
        sum.energy += terms.energy;
        sum.dirichlet += terms.dirichlet;
        sum.total += terms.total;
    }
    let inv = 1.0 / fields.len().max(1) as f64;
    Ok(LossTerms {
        energy: sum.energy * inv,
        dirichlet: sum.dirichlet * inv,
        total: sum.total * inv,
    })
}

/// Minimise the energy term directly over nodal temperatures with the
/// Dirichlet values substituted exactly. The energy is quadratic, so this is
/// one linear solve of its normal equations (LU factorisation).
pub fn direct_minimize_field(k: &[f64], ops: &PrecomputedLossOperators) -> Result<TemperatureField> {
    let n = ops.n_nodes;
    if k.len() != n {
        return Err(FolError::mismatch(format!(
            "expected {n} conductivities, got {}",
            k.len()
        )));
    }
    // Hessian of the energy term: 2 lambda_e sum_e K_e.
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for nodes in &ops.elements {
        let m = ops.element_matrix(&nodes.map(|i| k[i]));
        for a in 0..4 {
            for b in 0..4 {
                hess[(nodes[a], nodes[b])] += 2.0 * ops.lambda_e * m[a][b];
            }
        }
    }
    let mut fixed = vec![None; n];
    for &(node, t) in &ops.dirichlet {
        fixed[node] = Some(t);
    }
    let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
    let mut a = DMatrix::<f64>::zeros(free.len(), free.len());
    let mut rhs = DVector::<f64>::zeros(free.len());
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            a[(r, c)] = hess[(i, j)];
        }
        rhs[r] = -(0..n).filter_map(|j| fixed[j].map(|t| hess[(i, j)] * t)).sum::<f64>();
    }
    let x = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| FolError::numerical("energy Hessian is singular"))?;
    let mut values = vec![0.0; n];
    for (node, t) in fixed.iter().enumerate() {
        if let Some(t) = t {
            values[node] = *t;
        }
    }
    for (r, &i) in free.iter().enumerate() {
        values[i] = x[r];
    }
    Ok(TemperatureField::new(values))
}
