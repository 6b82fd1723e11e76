//! Three-layer graph convolutional node classifier with exact gradients.
//!
//! Layer `l` computes `Â · H · W_l + b_l` where `Â = D̃^{-1/2} (A + I) D̃^{-1/2}`.
//! ReLU follows the first two layers; the third is linear. A per-node affine
//! head maps the concatenated layer outputs `[H1 | H2 | H3]` to class logits,
//! followed by a row-wise log-softmax.
//!
//! Propagation runs over a compressed-row operator built from the adjacency's
//! support, so cost scales with edges rather than `n²`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph, Split};
use crate::linalg::{Csr, Matrix};
use crate::optim::Adam;
use crate::seed;

pub const HIDDEN: usize = 20;
pub const N_LAYERS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    /// `p→20`, `20→20`, `20→20`.
    pub conv_weights: Vec<Matrix>,
    pub conv_biases: Vec<Vec<f64>>,
    /// `(3·20)→C`, reading the concatenated layer outputs.
    pub out_weight: Matrix,
    pub out_bias: Vec<f64>,
    pub n_classes: usize,
}

impl GcnModel {
    /// Conv weights and biases uniform in `±1/sqrt(20)`; the output layer
    /// uniform in `±1/sqrt(60)`.
    pub fn init(feature_dim: usize, n_classes: usize, rng: &mut impl Rng) -> Self {
        let mut uniform = |n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-s..=s)).collect() };
        let s_conv = 1.0 / libm::sqrt(HIDDEN as f64);
        let mut conv_weights = Vec::with_capacity(N_LAYERS);
        let mut conv_biases = Vec::with_capacity(N_LAYERS);
        for fan_in in [feature_dim, HIDDEN, HIDDEN] {
            let w = uniform(fan_in * HIDDEN, s_conv);
            conv_weights.push(Matrix::from_vec(fan_in, HIDDEN, w).expect("length matches"));
            conv_biases.push(uniform(HIDDEN, s_conv));
        }
        let concat = N_LAYERS * HIDDEN;
        let s_out = 1.0 / libm::sqrt(concat as f64);
        let out_weight =
            Matrix::from_vec(concat, n_classes, uniform(concat * n_classes, s_out)).expect("length matches");
        let out_bias = uniform(n_classes, s_out);
        Self { conv_weights, conv_biases, out_weight, out_bias, n_classes }
    }

    /// All-zero parameters: every node gets uniform class probabilities.
    pub fn zeros(feature_dim: usize, n_classes: usize) -> Self {
        Self {
            conv_weights: vec![
                Matrix::zeros(feature_dim, HIDDEN),
                Matrix::zeros(HIDDEN, HIDDEN),
                Matrix::zeros(HIDDEN, HIDDEN),
            ],
            conv_biases: vec![vec![0.0; HIDDEN]; N_LAYERS],
            out_weight: Matrix::zeros(N_LAYERS * HIDDEN, n_classes),
            out_bias: vec![0.0; n_classes],
            n_classes,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.conv_weights[0].rows()
    }

    /// Checks the layer shapes chain and all parameters are finite.
    pub fn validate(&self) -> Result<()> {
        let shape_err = |m: &str| Err(Error::Shape(format!("model: {m}")));
        if self.conv_weights.len() != N_LAYERS || self.conv_biases.len() != N_LAYERS {
            return shape_err("expected three convolution layers");
        }
        let mut width = self.feature_dim();
        for (w, b) in self.conv_weights.iter().zip(&self.conv_biases) {
            if w.rows() != width || b.len() != w.cols() {
                return shape_err("convolution shapes do not chain");
            }
            width = w.cols();
        }
        let head_in: usize = self.conv_weights.iter().map(Matrix::cols).sum();
        if self.out_weight.shape() != (head_in, self.n_classes) || self.out_bias.len() != self.n_classes {
            return shape_err("output head shape");
        }
        if self.params().any(|p| p.iter().any(|x| !x.is_finite())) {
            return shape_err("non-finite parameter");
        }
        Ok(())
    }

    /// Parameter blocks in a fixed order shared with [`GcnGrads`].
    pub fn params(&self) -> impl Iterator<Item = &[f64]> {
        self.conv_weights
            .iter()
            .map(Matrix::as_slice)
            .chain(self.conv_biases.iter().map(Vec::as_slice))
            .chain([self.out_weight.as_slice(), self.out_bias.as_slice()])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.conv_weights
            .iter_mut()
            .map(Matrix::as_mut_slice)
            .chain(self.conv_biases.iter_mut().map(Vec::as_mut_slice))
            .chain([self.out_weight.as_mut_slice(), self.out_bias.as_mut_slice()])
    }
}

/// Gradients with the same block layout as [`GcnModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct GcnGrads {
    pub conv_weights: Vec<Matrix>,
    pub conv_biases: Vec<Vec<f64>>,
    pub out_weight: Matrix,
    pub out_bias: Vec<f64>,
}

impl GcnGrads {
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.conv_weights
            .iter()
            .map(Matrix::as_slice)
            .chain(self.conv_biases.iter().map(Vec::as_slice))
            .chain([self.out_weight.as_slice(), self.out_bias.as_slice()])
    }
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `H_{l-1} · W_l`, the matrix each layer propagates.
    projected: Vec<Matrix>,
    /// `Â · H_{l-1} · W_l + b_l`.
    pre_activations: Vec<Matrix>,
    outputs: Vec<Matrix>,
    input: Matrix,
    log_probs: Matrix,
}

impl ForwardCache {
    pub fn log_probs(&self) -> &Matrix {
        &self.log_probs
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` for a symmetric 0/1 adjacency with zero diagonal.
pub fn normalize_adjacency(a: &Matrix) -> Result<Matrix> {
    a.check_symmetric()?;
    Ok(EdgePropagation::unit(a)?.csr().to_dense())
}

/// Dense-input forward pass. Returns row-wise class log-probabilities.
pub fn forward(model: &GcnModel, a_norm: &Matrix, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    check_inputs(model, a_norm.rows(), a_norm.cols(), x)?;
    let prop = Csr::from_dense(a_norm)?;
    let cache = forward_csr(model, &prop, x);
    Ok((cache.log_probs.clone(), cache))
}

fn check_inputs(model: &GcnModel, rows: usize, cols: usize, x: &Matrix) -> Result<()> {
    if rows != cols || rows != x.rows() {
        return Err(Error::Shape(format!("propagation {rows}x{cols} against {} feature rows", x.rows())));
    }
    if x.cols() != model.feature_dim() {
        return Err(Error::Shape(format!("{} feature columns, model expects {}", x.cols(), model.feature_dim())));
    }
    Ok(())
}

pub(crate) fn forward_csr(model: &GcnModel, prop: &Csr, x: &Matrix) -> ForwardCache {
    let mut projected = Vec::with_capacity(N_LAYERS);
    let mut pre_activations = Vec::with_capacity(N_LAYERS);
    let mut outputs: Vec<Matrix> = Vec::with_capacity(N_LAYERS);
    for l in 0..N_LAYERS {
        let h_in = if l == 0 { x } else { &outputs[l - 1] };
        let xw = h_in.matmul(&model.conv_weights[l]).expect("validated shapes");
        let mut z = prop.apply(&xw);
        z.add_row_vector(&model.conv_biases[l]);
        let h = if l + 1 < N_LAYERS { z.map(relu) } else { z.clone() };
        projected.push(xw);
        pre_activations.push(z);
        outputs.push(h);
    }
    let head_in = concat_columns(&outputs);
    let mut logits = head_in.matmul(&model.out_weight).expect("validated shapes");
    logits.add_row_vector(&model.out_bias);
    let log_probs = log_softmax_rows(&logits);
    ForwardCache { projected, pre_activations, outputs, input: x.clone(), log_probs }
}

/// Log-probabilities of one node only; skips nothing numerically but avoids
/// cloning the cache for callers that just need a prediction.
pub(crate) fn log_probs_csr(model: &GcnModel, prop: &Csr, x: &Matrix) -> Matrix {
    forward_csr(model, prop, x).log_probs
}

/// Gradients of a scalar loss given `dL/d(log_probs)`.
///
/// When `prop_grad` is set, it receives `dL/dÂ_k` for every stored entry `k`
/// of the propagation operator (accumulated over layers).
pub(crate) fn backward(
    model: &GcnModel,
    prop: &Csr,
    cache: &ForwardCache,
    d_log_probs: &Matrix,
    mut prop_grad: Option<&mut [f64]>,
) -> GcnGrads {
    let probs = cache.log_probs.map(libm::exp);
    let n = d_log_probs.rows();
    let c = model.n_classes;
    let mut d_logits = Matrix::zeros(n, c);
    for i in 0..n {
        let g = d_log_probs.row(i);
        let total: f64 = g.iter().sum();
        if total == 0.0 && g.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (k, d) in d_logits.row_mut(i).iter_mut().enumerate() {
            *d = g[k] - probs[(i, k)] * total;
        }
    }
    let head_in = concat_columns(&cache.outputs);
    let out_weight = head_in.t_matmul(&d_logits).expect("shapes");
    let out_bias = d_logits.column_sums();
    let d_head = d_logits.matmul_t(&model.out_weight).expect("shapes");

    let mut d_outputs = split_columns(&d_head, &cache.outputs);
    let mut conv_weights = vec![Matrix::zeros(0, 0); N_LAYERS];
    let mut conv_biases = vec![Vec::new(); N_LAYERS];
    for l in (0..N_LAYERS).rev() {
        let mut dz = d_outputs[l].clone();
        if l + 1 < N_LAYERS {
            for (d, &z) in dz.as_mut_slice().iter_mut().zip(cache.pre_activations[l].as_slice()) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        conv_biases[l] = dz.column_sums();
        if let Some(pg) = prop_grad.as_deref_mut() {
            let xw = &cache.projected[l];
            for i in 0..prop.n() {
                let dzi = dz.row(i);
                if dzi.iter().all(|&v| v == 0.0) {
                    continue;
                }
                for k in prop.row_range(i) {
                    pg[k] += crate::linalg::dot(dzi, xw.row(prop.col(k)));
                }
            }
        }
        let d_xw = prop.apply_transpose(&dz);
        let h_in = if l == 0 { &cache.input } else { &cache.outputs[l - 1] };
        conv_weights[l] = h_in.t_matmul(&d_xw).expect("shapes");
        if l > 0 {
            let d_h = d_xw.matmul_t(&model.conv_weights[l]).expect("shapes");
            for (acc, g) in d_outputs[l - 1].as_mut_slice().iter_mut().zip(d_h.as_slice()) {
                *acc += g;
            }
        }
    }
    GcnGrads { conv_weights, conv_biases, out_weight, out_bias }
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn concat_columns(parts: &[Matrix]) -> Matrix {
    let n = parts[0].rows();
    let width: usize = parts.iter().map(Matrix::cols).sum();
    let mut out = Matrix::zeros(n, width);
    for i in 0..n {
        let row = out.row_mut(i);
        let mut off = 0;
        for p in parts {
            row[off..off + p.cols()].copy_from_slice(p.row(i));
            off += p.cols();
        }
    }
    out
}

fn split_columns(m: &Matrix, like: &[Matrix]) -> Vec<Matrix> {
    let mut off = 0;
    like.iter()
        .map(|p| {
            let mut out = Matrix::zeros(m.rows(), p.cols());
            for i in 0..m.rows() {
                out.row_mut(i).copy_from_slice(&m.row(i)[off..off + p.cols()]);
            }
            off += p.cols();
            out
        })
        .collect()
}

pub(crate) fn log_softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(row.iter().map(|&z| libm::exp(z - max)).sum::<f64>());
        for z in row.iter_mut() {
            *z -= lse;
        }
    }
    out
}

/// Lowest-index argmax.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Class predicted for the center node of a subgraph, ties to the lowest id.
pub fn predict(model: &GcnModel, a_v: &Matrix, x_v: &Matrix, center_local: usize) -> Result<usize> {
    let prop = EdgePropagation::unit(a_v)?;
    check_inputs(model, a_v.rows(), a_v.cols(), x_v)?;
    Ok(argmax(log_probs_csr(model, prop.csr(), x_v).row(center_local)))
}

/// Normalized propagation over the edges of a fixed graph, with one
/// real-valued weight per undirected edge (weight 1 everywhere reproduces
/// [`normalize_adjacency`]).
///
/// `Â_ij = w_e · r_i · r_j`, `Â_ii = r_i²`, `r_i = (1 + Σ_{e∋i} w_e)^{-1/2}`.
#[derive(Debug, Clone)]
pub(crate) struct EdgePropagation {
    edges: Vec<Edge>,
    csr: Csr,
    diag: Vec<usize>,
    /// Positions of `(i, j)` and `(j, i)` in the operator for each edge.
    slots: Vec<(usize, usize)>,
    inv_sqrt_deg: Vec<f64>,
}

impl EdgePropagation {
    pub(crate) fn new(n: usize, edges: Vec<Edge>) -> Self {
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(i, j) in &edges {
            rows[i].push(j);
            rows[j].push(i);
        }
        for r in rows.iter_mut() {
            r.sort_unstable();
        }
        let csr = Csr::from_pattern(&rows);
        let find = |i: usize, j: usize| {
            let r = csr.row_range(i);
            r.start + rows[i].binary_search(&j).expect("in pattern")
        };
        let diag = (0..n).map(|i| find(i, i)).collect();
        let slots = edges.iter().map(|&(i, j)| (find(i, j), find(j, i))).collect();
        Self { edges, csr, diag, slots, inv_sqrt_deg: vec![1.0; n] }
    }

    pub(crate) fn from_adjacency(a: &Matrix) -> Result<Self> {
        let edges = crate::graph::edge_list(a)?;
        Ok(Self::new(a.rows(), edges))
    }

    /// All edge weights set to 1.
    pub(crate) fn unit(a: &Matrix) -> Result<Self> {
        let mut p = Self::from_adjacency(a)?;
        p.set_weights(&vec![1.0; p.edges.len()]);
        Ok(p)
    }

    pub(crate) fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub(crate) fn csr(&self) -> &Csr {
        &self.csr
    }

    pub(crate) fn set_weights(&mut self, w: &[f64]) {
        debug_assert_eq!(w.len(), self.edges.len());
        let n = self.diag.len();
        let mut deg = vec![1.0; n];
        for (&(i, j), &we) in self.edges.iter().zip(w) {
            deg[i] += we;
            deg[j] += we;
        }
        for (r, d) in self.inv_sqrt_deg.iter_mut().zip(&deg) {
            *r = 1.0 / libm::sqrt(*d);
        }
        let r = &self.inv_sqrt_deg;
        let values = self.csr.values_mut();
        for i in 0..n {
            values[self.diag[i]] = r[i] * r[i];
        }
        for ((&(i, j), &(kij, kji)), &we) in self.edges.iter().zip(&self.slots).zip(w) {
            let v = we * r[i] * r[j];
            values[kij] = v;
            values[kji] = v;
        }
    }

    /// Chains `dL/dÂ` (per operator entry) back to `dL/dw` (per edge),
    /// including the dependence of the degree normalization on `w`.
    pub(crate) fn weight_grad(&self, prop_grad: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let r = &self.inv_sqrt_deg;
        // dL/dr_i · r_i = Σ_row g·V + Σ_col g·V.
        let mut gv = vec![0.0; n];
        for i in 0..n {
            for k in self.csr.row_range(i) {
                let t = prop_grad[k] * self.csr.value(k);
                gv[i] += t;
                gv[self.csr.col(k)] += t;
            }
        }
        // dL/dd_i = dL/dr_i · (-½ r_i³) = -½ r_i² · gv_i.
        let d_deg: Vec<f64> = (0..n).map(|i| -0.5 * r[i] * r[i] * gv[i]).collect();
        self.edges
            .iter()
            .zip(&self.slots)
            .map(|(&(i, j), &(kij, kji))| (prop_grad[kij] + prop_grad[kji]) * r[i] * r[j] + d_deg[i] + d_deg[j])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Gradients are rescaled to at most this L2 norm before each step.
    pub clip_norm: f64,
    /// Independent initializations; the one with the lowest final training
    /// loss is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 5000, learning_rate: 0.005, weight_decay: 5e-4, clip_norm: 2.0, restarts: 6, seed: 0 }
    }
}

impl TrainConfig {
    // Written with negations so that NaN fails too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate {} must be > 0", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("weight_decay must be >= 0".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidConfig("clip_norm must be > 0".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: GcnModel,
    pub train_acc: f64,
    pub test_acc: f64,
    pub final_loss: f64,
}

fn clip_grads(g: &mut GcnGrads, max_norm: f64) {
    let norm = libm::sqrt(g.blocks().flatten().map(|x| x * x).sum::<f64>());
    if norm <= max_norm {
        return;
    }
    let f = max_norm / (norm + 1e-6);
    let scale = |xs: &mut [f64]| xs.iter_mut().for_each(|x| *x *= f);
    g.conv_weights.iter_mut().for_each(|m| scale(m.as_mut_slice()));
    g.conv_biases.iter_mut().for_each(|b| scale(b));
    scale(g.out_weight.as_mut_slice());
    scale(&mut g.out_bias);
}

/// Mean NLL over `nodes` and its gradient w.r.t. the log-probabilities.
fn nll(log_probs: &Matrix, labels: &[usize], nodes: &[usize]) -> (f64, Matrix) {
    let mut d = Matrix::zeros(log_probs.rows(), log_probs.cols());
    let scale = 1.0 / nodes.len().max(1) as f64;
    let mut loss = 0.0;
    for &v in nodes {
        loss -= log_probs[(v, labels[v])] * scale;
        d[(v, labels[v])] = -scale;
    }
    (loss, d)
}

fn accuracy(log_probs: &Matrix, labels: &[usize], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let hits = nodes.iter().filter(|&&v| argmax(log_probs.row(v)) == labels[v]).count();
    hits as f64 / nodes.len() as f64
}

/// Full-batch training on the train split with Adam, L2 weight decay and
/// gradient-norm clipping. Deterministic for a given config.
pub fn train(graph: &Graph, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let prop = EdgePropagation::unit(graph.adjacency())?;
    let train_nodes = graph.nodes_in(Split::Train);
    let test_nodes = graph.nodes_in(Split::Test);
    let mut best: Option<(f64, GcnModel)> = None;
    for restart in 0..config.restarts {
        let mut rng = seed::rng(seed::item_seed(config.seed, restart as u64));
        let mut model = GcnModel::init(graph.feature_dim(), graph.n_classes(), &mut rng);
        let mut adam = Adam::new(&model, config.learning_rate);
        for epoch in 0..config.epochs {
            let cache = forward_csr(&model, prop.csr(), graph.features());
            let (loss, d) = nll(&cache.log_probs, graph.labels(), &train_nodes);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step: epoch, value: loss });
            }
            let mut grads = backward(&model, prop.csr(), &cache, &d, None);
            clip_grads(&mut grads, config.clip_norm);
            adam.step(&mut model, &grads, config.weight_decay);
        }
        let lp = log_probs_csr(&model, prop.csr(), graph.features());
        let (loss, _) = nll(&lp, graph.labels(), &train_nodes);
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, model));
        }
    }
    let (final_loss, model) = best.expect("restarts >= 1");
    let lp = log_probs_csr(&model, prop.csr(), graph.features());
    Ok(TrainOutcome {
        train_acc: accuracy(&lp, graph.labels(), &train_nodes),
        test_acc: accuracy(&lp, graph.labels(), &test_nodes),
        final_loss,
        model,
    })
}

/// Mean NLL over all rows of `labels` and its analytic parameter gradient.
pub fn nll_and_grads(model: &GcnModel, a: &Matrix, x: &Matrix, labels: &[usize]) -> Result<(f64, GcnGrads)> {
    model.validate()?;
    let prop = EdgePropagation::unit(a)?;
    check_inputs(model, a.rows(), a.cols(), x)?;
    if labels.len() != a.rows() {
        return Err(Error::Shape(format!("{} labels for {} nodes", labels.len(), a.rows())));
    }
    let nodes: Vec<usize> = (0..labels.len()).collect();
    let cache = forward_csr(model, prop.csr(), x);
    let (loss, d) = nll(&cache.log_probs, labels, &nodes);
    Ok((loss, backward(model, prop.csr(), &cache, &d, None)))
}

/// Largest relative error between analytic and central-difference
/// (`h = 1e-5`) gradients of the mean NLL over every parameter.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`: entries whose gradient
/// is below the round-off level of a `h = 1e-5` difference (about `1e-11`)
/// are compared in absolute terms.
pub fn grad_check(model: &GcnModel, a: &Matrix, x: &Matrix, labels: &[usize]) -> Result<f64> {
    const H: f64 = 1e-5;
    let (_, grads) = nll_and_grads(model, a, x, labels)?;
    let analytic: Vec<f64> = grads.blocks().flat_map(|b| b.iter().copied()).collect();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut flat = 0;
    let n_blocks = probe.params().count();
    for b in 0..n_blocks {
        let len = probe.params().nth(b).map_or(0, <[f64]>::len);
        for k in 0..len {
            let orig = probe.params().nth(b).expect("block")[k];
            probe.params_mut().nth(b).expect("block")[k] = orig + H;
            let plus = nll_and_grads(&probe, a, x, labels)?.0;
            probe.params_mut().nth(b).expect("block")[k] = orig - H;
            let minus = nll_and_grads(&probe, a, x, labels)?.0;
            probe.params_mut().nth(b).expect("block")[k] = orig;
            let numeric = (plus - minus) / (2.0 * H);
            worst = worst.max(relative_error(analytic[flat], numeric));
            flat += 1;
        }
    }
    Ok(worst)
}

pub(crate) fn relative_error(a: f64, b: f64) -> f64 {
    libm::fabs(a - b) / libm::fabs(a).max(libm::fabs(b)).max(1e-6)
}
