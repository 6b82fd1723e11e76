//! Counterfactual explanations by learned edge deletion.
//!
//! For a node `v` the explainer learns one real value `p̂_e` per undirected
//! edge of its computation subgraph. Thresholding `σ(p̂) ≥ 0.5` gives the
//! binary retention mask `P`; the candidate counterfactual keeps exactly the
//! edges with `P_e = 1`. Starting from `p̂ = 1` (all edges kept), each
//! iteration:
//!
//! 1. evaluates the binary candidate and records it if the prediction flips
//!    and it deletes strictly fewer edges than the best so far;
//! 2. runs the model on the relaxed graph `σ(p̂) ⊙ A_v` (degrees renormalized
//!    from the relaxed weights) and takes a gradient step on
//!    `L = -1[f(v̄) = f(v)] · NLL(f(v) | g) + β Σ_e (1 − σ(p̂_e))`.
//!
//! Only deletions are possible since `p̂` lives on existing edges only.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::datasets::DatasetKind;
use crate::error::{Error, Result};
use crate::gcn::{self, argmax, EdgePropagation, GcnModel};
use crate::graph::{extract_subgraph, Edge, Graph, SubgraphNeighborhood};
use crate::linalg::Matrix;
use crate::optim::NesterovSgd;

/// Subgraph radius: one hop past the model's receptive field, so nodes on
/// the rim keep their full degree and the centre's prediction is exact.
pub const SUBGRAPH_HOPS: usize = gcn::N_LAYERS + 1;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExplainerConfig {
    pub iterations: usize,
    pub beta: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl ExplainerConfig {
    // Written with negations so that NaN fails too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "beta {} must be >= 0, learning rate {} > 0, momentum {} in [0, 1)",
                self.beta, self.learning_rate, self.momentum
            )));
        }
        Ok(())
    }
}

/// K = 500, β = 0.5, α = 0.1; Nesterov momentum 0.9 on ba-shapes only.
pub fn default_config(kind: DatasetKind) -> ExplainerConfig {
    let momentum = match kind {
        DatasetKind::TreeCycles | DatasetKind::TreeGrid => 0.0,
        DatasetKind::BaShapes => 0.9,
    };
    ExplainerConfig { iterations: 500, beta: 0.5, learning_rate: 0.1, momentum, seed: 0 }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Real-valued perturbation parameters, one per undirected subgraph edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationState {
    n_nodes: usize,
    edges: Vec<Edge>,
    pub p_hat: Vec<f64>,
}

impl PerturbationState {
    /// `p̂ = 1` on every edge, which retains the whole graph.
    pub fn new(n_nodes: usize, edges: Vec<Edge>) -> Self {
        let p_hat = vec![1.0; edges.len()];
        Self { n_nodes, edges, p_hat }
    }

    pub fn with_values(n_nodes: usize, edges: Vec<Edge>, p_hat: Vec<f64>) -> Result<Self> {
        if p_hat.len() != edges.len() {
            return Err(Error::Shape(format!("{} values for {} edges", p_hat.len(), edges.len())));
        }
        Ok(Self { n_nodes, edges, p_hat })
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// `σ(p̂_e)` per edge.
    pub fn relaxed(&self) -> Vec<f64> {
        self.p_hat.iter().map(|&p| sigmoid(p)).collect()
    }

    /// Binary retention per edge: `1` iff `σ(p̂_e) ≥ 0.5`.
    pub fn binary(&self) -> Vec<f64> {
        self.p_hat.iter().map(|&p| if sigmoid(p) >= 0.5 { 1.0 } else { 0.0 }).collect()
    }

    /// Expands per-edge values into a symmetric `n × n` matrix (zero elsewhere).
    pub fn expand(&self, per_edge: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(self.n_nodes, self.n_nodes);
        for (&(i, j), &w) in self.edges.iter().zip(per_edge) {
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        m
    }
}

/// Binary symmetric mask `P = 1[σ(P̂) ≥ 0.5]` on the edge support.
pub fn threshold_mask(state: &PerturbationState) -> Matrix {
    state.expand(&state.binary())
}

/// Log-probabilities of the counterfactual model: the same GCN run on
/// `D̄^{-1/2} (mask ⊙ A_v + I) D̄^{-1/2}` with `D̄_ii = 1 + Σ_j (mask ⊙ A_v)_ij`.
pub fn cf_forward(model: &GcnModel, a_v: &Matrix, x_v: &Matrix, mask: &Matrix) -> Result<Matrix> {
    if mask.shape() != a_v.shape() {
        return Err(Error::Shape(format!("mask {:?} against adjacency {:?}", mask.shape(), a_v.shape())));
    }
    mask.check_symmetric()?;
    if x_v.rows() != a_v.rows() || x_v.cols() != model.feature_dim() {
        return Err(Error::Shape(format!("features {:?} for {} nodes", x_v.shape(), a_v.rows())));
    }
    let mut prop = EdgePropagation::from_adjacency(a_v)?;
    let weights: Vec<f64> = prop.edges().iter().map(|&(i, j)| mask[(i, j)]).collect();
    prop.set_weights(&weights);
    Ok(gcn::log_probs_csr(model, prop.csr(), x_v))
}

/// Value and gradient of the counterfactual loss at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct CfLoss {
    pub loss: f64,
    pub pred_loss: f64,
    pub dist_loss: f64,
    /// `dL/dp̂`, one entry per edge.
    pub grad: Vec<f64>,
    /// Class of the binary candidate for this state.
    pub binary_class: usize,
}

/// One node's explanation problem: the subgraph, the model and a reusable
/// propagation operator on the subgraph's edge support.
pub(crate) struct CfProblem<'a> {
    model: &'a GcnModel,
    x_v: &'a Matrix,
    center: usize,
    prop: EdgePropagation,
}

impl<'a> CfProblem<'a> {
    pub(crate) fn new(model: &'a GcnModel, sub: &'a SubgraphNeighborhood) -> Result<Self> {
        model.validate()?;
        if sub.x_v.cols() != model.feature_dim() {
            return Err(Error::Shape(format!(
                "{} feature columns, model expects {}",
                sub.x_v.cols(),
                model.feature_dim()
            )));
        }
        let prop = EdgePropagation::new(sub.n_nodes(), sub.edges());
        Ok(Self { model, x_v: &sub.x_v, center: sub.center_local, prop })
    }

    pub(crate) fn edges(&self) -> &[Edge] {
        self.prop.edges()
    }

    /// Center prediction with per-edge weights (binary or relaxed).
    pub(crate) fn classify(&mut self, weights: &[f64]) -> usize {
        self.prop.set_weights(weights);
        let lp = gcn::log_probs_csr(self.model, self.prop.csr(), self.x_v);
        argmax(lp.row(self.center))
    }

    pub(crate) fn loss(&mut self, p_hat: &[f64], original_class: usize, beta: f64) -> CfLoss {
        let binary: Vec<f64> = p_hat.iter().map(|&p| if sigmoid(p) >= 0.5 { 1.0 } else { 0.0 }).collect();
        let binary_class = self.classify(&binary);
        let s: Vec<f64> = p_hat.iter().map(|&p| sigmoid(p)).collect();
        let dist_loss: f64 = s.iter().map(|&v| 1.0 - v).sum();
        let mut d_s = vec![-beta; s.len()];
        let mut pred_loss = 0.0;
        if binary_class == original_class {
            self.prop.set_weights(&s);
            let cache = gcn::forward_csr(self.model, self.prop.csr(), self.x_v);
            // -NLL(original) = log p(original)
            pred_loss = cache.log_probs()[(self.center, original_class)];
            let mut seed = Matrix::zeros(cache.log_probs().rows(), self.model.n_classes);
            seed[(self.center, original_class)] = 1.0;
            let mut prop_grad = vec![0.0; self.prop.csr().nnz()];
            gcn::backward(self.model, self.prop.csr(), &cache, &seed, Some(&mut prop_grad));
            for (d, g) in d_s.iter_mut().zip(self.prop.weight_grad(&prop_grad)) {
                *d += g;
            }
        }
        let grad = d_s.iter().zip(&s).map(|(&d, &sv)| d * sv * (1.0 - sv)).collect();
        CfLoss { loss: pred_loss + beta * dist_loss, pred_loss, dist_loss, grad, binary_class }
    }
}

/// Loss and `dL/dp̂` for `state` on `sub`.
///
/// The prediction term is gated by the binary candidate: once it no longer
/// predicts `original_class` the term and its gradient vanish.
pub fn cf_loss(
    model: &GcnModel,
    sub: &SubgraphNeighborhood,
    state: &PerturbationState,
    original_class: usize,
    beta: f64,
) -> Result<CfLoss> {
    let mut problem = CfProblem::new(model, sub)?;
    if problem.edges() != state.edges() {
        return Err(Error::Shape("perturbation state does not match the subgraph edges".into()));
    }
    let out = problem.loss(&state.p_hat, original_class, beta);
    if !out.loss.is_finite() {
        return Err(Error::NonFiniteLoss { step: 0, value: out.loss });
    }
    Ok(out)
}

/// A valid counterfactual: deleting `removed_edges` changes the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct CfExample {
    /// Deleted edges in subgraph-local ids.
    pub removed_edges: Vec<Edge>,
    /// The same edges in graph ids.
    pub removed_global: Vec<Edge>,
    pub new_class: usize,
    pub size: usize,
    pub found_at_iter: usize,
}

impl CfExample {
    /// `Ā_v = P ⊙ A_v`.
    pub fn a_bar(&self, a_v: &Matrix) -> Matrix {
        let mut a = a_v.clone();
        for &(i, j) in &self.removed_edges {
            a[(i, j)] = 0.0;
            a[(j, i)] = 0.0;
        }
        a
    }

    pub(crate) fn from_mask(
        sub: &SubgraphNeighborhood,
        edges: &[Edge],
        retained: &[f64],
        new_class: usize,
        iter: usize,
    ) -> Self {
        let removed_edges: Vec<Edge> = edges.iter().zip(retained).filter(|(_, &r)| r == 0.0).map(|(&e, _)| e).collect();
        let mut removed_global: Vec<Edge> = removed_edges.iter().map(|&e| sub.to_global(e)).collect();
        removed_global.sort_unstable();
        Self { size: removed_edges.len(), removed_edges, removed_global, new_class, found_at_iter: iter }
    }
}

/// Outcome of explaining one node with any method.
#[derive(Debug, Clone, PartialEq)]
pub struct CfResult {
    pub node: usize,
    pub original_class: usize,
    pub subgraph_nodes: usize,
    pub subgraph_edges: usize,
    pub example: Option<CfExample>,
    /// Iteration at which any valid counterfactual first appeared.
    pub first_found_at: Option<usize>,
    /// `(iteration, size)` each time the best counterfactual improved.
    pub best_size_history: Vec<(usize, usize)>,
}

/// Tracks the smallest valid counterfactual over a sequence of candidates.
/// Ties keep the earliest candidate.
pub(crate) struct BestTracker<'s> {
    sub: &'s SubgraphNeighborhood,
    original_class: usize,
    best: Option<CfExample>,
    first_found_at: Option<usize>,
    history: Vec<(usize, usize)>,
}

impl<'s> BestTracker<'s> {
    pub(crate) fn new(sub: &'s SubgraphNeighborhood, original_class: usize) -> Self {
        Self { sub, original_class, best: None, first_found_at: None, history: Vec::new() }
    }

    pub(crate) fn offer(&mut self, iter: usize, edges: &[Edge], retained: &[f64], class: usize) {
        if class == self.original_class {
            return;
        }
        self.first_found_at.get_or_insert(iter);
        let size = retained.iter().filter(|&&r| r == 0.0).count();
        if self.best.as_ref().is_none_or(|b| size < b.size) {
            self.best = Some(CfExample::from_mask(self.sub, edges, retained, class, iter));
            self.history.push((iter, size));
        }
    }

    pub(crate) fn finish(self) -> CfResult {
        CfResult {
            node: self.sub.center_global(),
            original_class: self.original_class,
            subgraph_nodes: self.sub.n_nodes(),
            subgraph_edges: self.sub.edges().len(),
            example: self.best,
            first_found_at: self.first_found_at,
            best_size_history: self.history,
        }
    }
}

/// Learns the smallest edge deletion on `v`'s computation subgraph that changes
/// the model's prediction. Returns no example if none was found within
/// `config.iterations`.
pub fn explain(model: &GcnModel, graph: &Graph, v: usize, config: &ExplainerConfig) -> Result<CfResult> {
    config.validate()?;
    let sub = extract_subgraph(graph, v, SUBGRAPH_HOPS)?;
    explain_subgraph(model, &sub, config)
}

/// [`explain`] on an already extracted subgraph.
pub fn explain_subgraph(model: &GcnModel, sub: &SubgraphNeighborhood, config: &ExplainerConfig) -> Result<CfResult> {
    config.validate()?;
    let mut problem = CfProblem::new(model, sub)?;
    let edges = problem.edges().to_vec();
    let original_class = problem.classify(&vec![1.0; edges.len()]);
    let mut state = PerturbationState::new(sub.n_nodes(), edges);
    let mut opt = NesterovSgd::new(state.p_hat.len(), config.learning_rate, config.momentum);
    let mut tracker = BestTracker::new(sub, original_class);
    for iter in 0..config.iterations {
        let out = problem.loss(&state.p_hat, original_class, config.beta);
        tracker.offer(iter, state.edges(), &state.binary(), out.binary_class);
        if !out.loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: iter, value: out.loss });
        }
        opt.step(&mut state.p_hat, &out.grad);
    }
    Ok(tracker.finish())
}
