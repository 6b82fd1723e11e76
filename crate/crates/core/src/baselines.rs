//! Comparison methods: random masks and the two ego-graph heuristics.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Result;
use crate::explainer::{BestTracker, CfProblem, CfResult, PerturbationState, SUBGRAPH_HOPS};
use crate::gcn::GcnModel;
use crate::graph::{extract_subgraph, Edge, Graph, SubgraphNeighborhood};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Random { trials: usize, seed: u64 },
    Keep1Hop,
    Rm1Hop,
}

impl BaselineKind {
    pub fn explain(self, model: &GcnModel, graph: &Graph, v: usize) -> Result<CfResult> {
        match self {
            BaselineKind::Random { trials, seed } => explain_random(model, graph, v, trials, seed),
            BaselineKind::Keep1Hop => explain_keep_1hop(model, graph, v),
            BaselineKind::Rm1Hop => explain_rm_1hop(model, graph, v),
        }
    }
}

/// `trials` independent draws of `p̂ ~ U[-1, 1]` per edge, thresholded exactly
/// like the learned mask; keeps the smallest deletion that flips the class.
/// The draws for node `v` depend only on `(seed, v)`.
pub fn explain_random(model: &GcnModel, graph: &Graph, v: usize, trials: usize, seed: u64) -> Result<CfResult> {
    let sub = extract_subgraph(graph, v, SUBGRAPH_HOPS)?;
    let mut rng = seed::rng(seed::item_seed(seed, v as u64));
    random_on_subgraph(model, &sub, trials, &mut rng)
}

pub(crate) fn random_on_subgraph(
    model: &GcnModel,
    sub: &SubgraphNeighborhood,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<CfResult> {
    let mut problem = CfProblem::new(model, sub)?;
    let edges = problem.edges().to_vec();
    let original = problem.classify(&vec![1.0; edges.len()]);
    let mut tracker = BestTracker::new(sub, original);
    for trial in 0..trials {
        let p_hat = edges.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let state = PerturbationState::with_values(sub.n_nodes(), edges.clone(), p_hat)?;
        let retained = state.binary();
        let class = problem.classify(&retained);
        tracker.offer(trial, &edges, &retained, class);
    }
    Ok(tracker.finish())
}

/// Whether each subgraph edge lies inside the ego graph `{v} ∪ N(v)`.
fn in_ego_graph(sub: &SubgraphNeighborhood, edges: &[Edge]) -> Vec<bool> {
    let c = sub.center_local;
    let ego: Vec<bool> = (0..sub.n_nodes()).map(|u| u == c || sub.a_v[(c, u)] != 0.0).collect();
    edges.iter().map(|&(i, j)| ego[i] && ego[j]).collect()
}

fn single_deletion(model: &GcnModel, sub: &SubgraphNeighborhood, remove: impl Fn(bool) -> bool) -> Result<CfResult> {
    let mut problem = CfProblem::new(model, sub)?;
    let edges = problem.edges().to_vec();
    let original = problem.classify(&vec![1.0; edges.len()]);
    let retained: Vec<f64> =
        in_ego_graph(sub, &edges).into_iter().map(|ego| if remove(ego) { 0.0 } else { 1.0 }).collect();
    let mut tracker = BestTracker::new(sub, original);
    if retained.contains(&0.0) {
        let class = problem.classify(&retained);
        tracker.offer(0, &edges, &retained, class);
    }
    Ok(tracker.finish())
}

/// Keeps only the edges of the ego graph of `v` and deletes every other
/// subgraph edge.
pub fn explain_keep_1hop(model: &GcnModel, graph: &Graph, v: usize) -> Result<CfResult> {
    let sub = extract_subgraph(graph, v, SUBGRAPH_HOPS)?;
    single_deletion(model, &sub, |ego| !ego)
}

/// Deletes every edge of the ego graph of `v` (edges among `{v} ∪ N(v)`).
pub fn explain_rm_1hop(model: &GcnModel, graph: &Graph, v: usize) -> Result<CfResult> {
    let sub = extract_subgraph(graph, v, SUBGRAPH_HOPS)?;
    single_deletion(model, &sub, |ego| ego)
}
