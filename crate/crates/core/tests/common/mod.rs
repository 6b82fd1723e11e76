#![allow(dead_code)]

use cfgnn_core::graph::{adjacency_from_edges, Edge, Split};
use cfgnn_core::{GcnModel, Graph, Matrix, SubgraphNeighborhood};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unlabelled graph with all-ones features; every node in the train split.
pub fn plain_graph(n: usize, edges: &[Edge]) -> Graph {
    Graph::new(n, edges, Matrix::filled(n, 1, 1.0), vec![0; n], 2, vec![false; n], &[], vec![Split::Train; n]).unwrap()
}

/// Connected random graph on `n` nodes: a random tree plus up to `extra`
/// chords.
pub fn random_edges(rng: &mut impl Rng, n: usize, extra: usize) -> Vec<Edge> {
    let mut edges: Vec<Edge> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let e = (a.min(b), a.max(b));
        if a != b && !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges.sort_unstable();
    edges
}

pub fn random_features(rng: &mut impl Rng, n: usize, p: usize) -> Matrix {
    Matrix::from_vec(n, p, (0..n * p).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub fn subgraph_of(n: usize, edges: &[Edge], x: Matrix, center: usize) -> SubgraphNeighborhood {
    SubgraphNeighborhood {
        center_local: center,
        a_v: adjacency_from_edges(n, edges),
        x_v: x,
        local_to_global: (0..n).collect(),
        hops: 4,
    }
}

pub fn random_model(rng: &mut impl Rng, p: usize, c: usize) -> GcnModel {
    GcnModel::init(p, c, rng)
}

/// Straight-line evaluation of the network on a weighted adjacency `w`
/// (zero diagonal) with explicit index loops.
#[allow(clippy::needless_range_loop)]
pub fn naive_log_probs(model: &GcnModel, w: &[Vec<f64>], x: &Matrix) -> Vec<Vec<f64>> {
    let n = w.len();
    let deg: Vec<f64> = (0..n).map(|i| 1.0 + w[i].iter().sum::<f64>()).collect();
    let a_hat = |i: usize, j: usize| {
        let aij = if i == j { 1.0 } else { w[i][j] };
        aij / (deg[i].sqrt() * deg[j].sqrt())
    };
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    let mut layers = Vec::new();
    for l in 0..3 {
        let wl = &model.conv_weights[l];
        let xw: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..wl.cols()).map(|k| (0..wl.rows()).map(|m| h[i][m] * wl[(m, k)]).sum()).collect())
            .collect();
        let mut next = vec![vec![0.0; wl.cols()]; n];
        for i in 0..n {
            for k in 0..wl.cols() {
                let mut z = model.conv_biases[l][k];
                for j in 0..n {
                    z += a_hat(i, j) * xw[j][k];
                }
                next[i][k] = if l < 2 { z.max(0.0) } else { z };
            }
        }
        layers.push(next.clone());
        h = next;
    }
    (0..n)
        .map(|i| {
            let cat: Vec<f64> = layers.iter().flat_map(|hl| hl[i].iter().copied()).collect();
            let logits: Vec<f64> = (0..model.n_classes)
                .map(|c| {
                    model.out_bias[c] + cat.iter().enumerate().map(|(k, v)| v * model.out_weight[(k, c)]).sum::<f64>()
                })
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            logits.iter().map(|z| z - lse).collect()
        })
        .collect()
}

pub fn dense_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Prediction after deleting the edges flagged in `removed`, computed by
/// the straight-line oracle.
pub fn naive_class(model: &GcnModel, n: usize, edges: &[Edge], removed: u32, x: &Matrix, center: usize) -> usize {
    let mut w = vec![vec![0.0; n]; n];
    for (k, &(i, j)) in edges.iter().enumerate() {
        if removed & (1 << k) == 0 {
            w[i][j] = 1.0;
            w[j][i] = 1.0;
        }
    }
    let lp = naive_log_probs(model, &w, x);
    let row = &lp[center];
    let mut best = 0;
    for c in 1..row.len() {
        if row[c] > row[best] {
            best = c;
        }
    }
    best
}
