//! Graph container, ℓ-hop computation subgraphs and structural statistics.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Undirected edge stored with `0 <= i < j`.
pub type Edge = (usize, usize);

#[inline]
pub fn ordered(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Test,
}

/// A full dataset graph: structure, node features, labels, planted motif
/// ground truth and the train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Matrix,
    neighbors: Vec<Vec<usize>>,
    features: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
    motif_nodes: Vec<bool>,
    motif_edges: BTreeSet<Edge>,
    split: Vec<Split>,
}

impl Graph {
    /// Validates and assembles a graph from an undirected edge list.
    ///
    /// `n_classes` must exceed every label. Edges may be given in either
    /// orientation but must not repeat or form self-loops.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_nodes: usize,
        edges: &[Edge],
        features: Matrix,
        labels: Vec<usize>,
        n_classes: usize,
        motif_nodes: Vec<bool>,
        motif_edges: &[Edge],
        split: Vec<Split>,
    ) -> Result<Self> {
        let invalid = |msg| Err(Error::InvalidGraph(msg));
        if features.rows() != n_nodes || labels.len() != n_nodes {
            return invalid(format!(
                "{n_nodes} nodes but {} feature rows and {} labels",
                features.rows(),
                labels.len()
            ));
        }
        if motif_nodes.len() != n_nodes || split.len() != n_nodes {
            return invalid(format!("motif flags or split length differs from {n_nodes} nodes"));
        }
        if let Some((v, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= n_classes) {
            return invalid(format!("label {l} of node {v} is not below {n_classes} classes"));
        }
        let mut adjacency = Matrix::zeros(n_nodes, n_nodes);
        for &(a, b) in edges {
            if a >= n_nodes || b >= n_nodes {
                return Err(Error::NodeOutOfRange { node: a.max(b), n_nodes });
            }
            if a == b {
                return invalid(format!("self-loop on node {a}"));
            }
            if adjacency[(a, b)] != 0.0 {
                return invalid(format!("duplicate edge ({a}, {b})"));
            }
            adjacency[(a, b)] = 1.0;
            adjacency[(b, a)] = 1.0;
        }
        let mut motif_set = BTreeSet::new();
        for &(a, b) in motif_edges {
            let e = ordered(a, b);
            if e.1 >= n_nodes || adjacency[e] == 0.0 {
                return invalid(format!("motif edge ({a}, {b}) is not a graph edge"));
            }
            if !motif_nodes[a] || !motif_nodes[b] {
                return invalid(format!("motif edge ({a}, {b}) touches a non-motif node"));
            }
            motif_set.insert(e);
        }
        let neighbors = (0..n_nodes).map(|i| (0..n_nodes).filter(|&j| adjacency[(i, j)] != 0.0).collect()).collect();
        Ok(Self { adjacency, neighbors, features, labels, n_classes, motif_nodes, motif_edges: motif_set, split })
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn motif_nodes(&self) -> &[bool] {
        &self.motif_nodes
    }

    pub fn motif_edges(&self) -> &BTreeSet<Edge> {
        &self.motif_edges
    }

    pub fn is_motif_edge(&self, a: usize, b: usize) -> bool {
        self.motif_edges.contains(&ordered(a, b))
    }

    pub fn split(&self) -> &[Split] {
        &self.split
    }

    pub fn nodes_in(&self, which: Split) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&v| self.split[v] == which).collect()
    }

    /// Undirected edges, `i < j`, sorted.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (i, nb) in self.neighbors.iter().enumerate() {
            out.extend(nb.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }
}

/// The ℓ-hop computation subgraph of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphNeighborhood {
    pub center_local: usize,
    pub a_v: Matrix,
    pub x_v: Matrix,
    pub local_to_global: Vec<usize>,
    pub hops: usize,
}

impl SubgraphNeighborhood {
    pub fn n_nodes(&self) -> usize {
        self.local_to_global.len()
    }

    pub fn center_global(&self) -> usize {
        self.local_to_global[self.center_local]
    }

    /// Undirected local edges, sorted.
    pub fn edges(&self) -> Vec<Edge> {
        // a_v is an induced submatrix of a validated symmetric adjacency.
        edge_list(&self.a_v).expect("subgraph adjacency is symmetric")
    }

    pub fn to_global(&self, (i, j): Edge) -> Edge {
        ordered(self.local_to_global[i], self.local_to_global[j])
    }
}

/// Induced subgraph on every node within `hops` BFS levels of `v`, in
/// ascending global id order.
pub fn extract_subgraph(graph: &Graph, v: usize, hops: usize) -> Result<SubgraphNeighborhood> {
    let n = graph.n_nodes();
    if v >= n {
        return Err(Error::NodeOutOfRange { node: v, n_nodes: n });
    }
    if hops == 0 {
        return Err(Error::InvalidConfig("hops must be at least 1".into()));
    }
    let mut depth = vec![usize::MAX; n];
    depth[v] = 0;
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        if depth[u] == hops {
            continue;
        }
        for &w in graph.neighbors(u) {
            if depth[w] == usize::MAX {
                depth[w] = depth[u] + 1;
                queue.push_back(w);
            }
        }
    }
    let local_to_global: Vec<usize> = (0..n).filter(|&u| depth[u] != usize::MAX).collect();
    let center_local = local_to_global.binary_search(&v).expect("center is reachable");
    let all_features: Vec<usize> = (0..graph.feature_dim()).collect();
    Ok(SubgraphNeighborhood {
        center_local,
        a_v: graph.adjacency().select(&local_to_global, &local_to_global),
        x_v: graph.features().select(&local_to_global, &all_features),
        local_to_global,
        hops,
    })
}

/// Each undirected edge of a symmetric 0/1 matrix once, as `(i, j)` with
/// `i < j`, in lexicographic order.
pub fn edge_list(a: &Matrix) -> Result<Vec<Edge>> {
    a.check_symmetric()?;
    let mut out = Vec::new();
    for i in 0..a.rows() {
        for j in i + 1..a.cols() {
            if a[(i, j)] != 0.0 {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

/// Symmetric 0/1 adjacency over `n` nodes from an undirected edge list.
pub fn adjacency_from_edges(n: usize, edges: &[Edge]) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    for &(i, j) in edges {
        a[(i, j)] = 1.0;
        a[(j, i)] = 1.0;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DegreeStats {
    pub avg_degree: f64,
    /// Nonzero adjacency entries, i.e. twice the undirected edge count.
    pub n_edges_directed: usize,
}

pub fn degree_stats(graph: &Graph) -> DegreeStats {
    let n_edges_directed: usize = (0..graph.n_nodes()).map(|v| graph.neighbors(v).len()).sum();
    let avg_degree = if graph.n_nodes() == 0 { 0.0 } else { n_edges_directed as f64 / graph.n_nodes() as f64 };
    DegreeStats { avg_degree, n_edges_directed }
}
