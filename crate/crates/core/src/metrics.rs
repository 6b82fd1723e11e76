//! Fidelity, explanation size, sparsity and motif accuracy over a set of
//! per-node outcomes.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::explainer::CfResult;
use crate::graph::{Edge, Graph};

/// Explanation method that produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Cf,
    Random,
    #[cfg_attr(feature = "serde", serde(rename = "keep_1hop"))]
    Keep1Hop,
    #[cfg_attr(feature = "serde", serde(rename = "rm_1hop"))]
    Rm1Hop,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Random, Method::Keep1Hop, Method::Rm1Hop, Method::Cf];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cf => "cf",
            Method::Random => "random",
            Method::Keep1Hop => "keep_1hop",
            Method::Rm1Hop => "rm_1hop",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cf" => Ok(Method::Cf),
            "random" => Ok(Method::Random),
            "keep_1hop" | "1hop" => Ok(Method::Keep1Hop),
            "rm_1hop" => Ok(Method::Rm1Hop),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

/// Flat per-node outcome, one line of a results file.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeRecord {
    pub method: Method,
    pub node: usize,
    pub original_class: usize,
    pub found: bool,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub new_class: Option<usize>,
    /// Deleted edges in graph ids.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub removed_edges: Option<Vec<Edge>>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub size: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub sparsity: Option<f64>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub iterations_to_first_cf: Option<usize>,
    pub subgraph_edges: usize,
}

impl NodeRecord {
    pub fn from_result(method: Method, r: &CfResult) -> Self {
        let ex = r.example.as_ref();
        Self {
            method,
            node: r.node,
            original_class: r.original_class,
            found: ex.is_some(),
            new_class: ex.map(|e| e.new_class),
            removed_edges: ex.map(|e| e.removed_global.clone()),
            size: ex.map(|e| e.size),
            sparsity: ex.map(|e| node_sparsity(e.size, r.subgraph_edges)),
            iterations_to_first_cf: r.first_found_at,
            subgraph_edges: r.subgraph_edges,
        }
    }
}

/// `1 − removed / total` for one node.
pub fn node_sparsity(removed: usize, total_edges: usize) -> f64 {
    if total_edges == 0 {
        return 1.0;
    }
    1.0 - removed as f64 / total_edges as f64
}

/// Share of evaluated nodes with no valid counterfactual. Lower is better.
pub fn fidelity(records: &[NodeRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput("fidelity of an empty result set"));
    }
    let found = records.iter().filter(|r| r.found).count();
    Ok(1.0 - found as f64 / records.len() as f64)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// `(size, proportion)` for every size that occurs, ascending.
    pub histogram: Vec<(usize, f64)>,
}

/// Statistics of the number of deleted edges over nodes with a counterfactual.
pub fn explanation_size(records: &[NodeRecord]) -> Result<SizeStats> {
    let sizes: Vec<usize> = records.iter().filter_map(|r| r.size).collect();
    if sizes.is_empty() {
        return Err(Error::EmptyInput("no counterfactuals found"));
    }
    let as_f: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let (mean, std) = mean_std(&as_f);
    let mut counts: alloc::collections::BTreeMap<usize, usize> = Default::default();
    for s in &sizes {
        *counts.entry(*s).or_default() += 1;
    }
    let total = sizes.len() as f64;
    let histogram = counts.into_iter().map(|(s, c)| (s, c as f64 / total)).collect();
    Ok(SizeStats { mean, std, histogram })
}

/// Mean and population std of per-node sparsity over nodes with a counterfactual.
pub fn sparsity(records: &[NodeRecord]) -> Result<(f64, f64)> {
    let xs: Vec<f64> = records.iter().filter_map(|r| r.sparsity).collect();
    if xs.is_empty() {
        return Err(Error::EmptyInput("no counterfactuals found"));
    }
    Ok(mean_std(&xs))
}

/// Among nodes originally predicted as a motif class (any class but 0) that
/// have a counterfactual, the share whose deleted edges are all motif edges.
/// `None` when no such node exists.
pub fn accuracy(records: &[NodeRecord], graph: &Graph) -> Option<f64> {
    let judged: Vec<bool> = records
        .iter()
        .filter(|r| r.original_class != 0)
        .filter_map(|r| r.removed_edges.as_ref())
        .map(|removed| removed.iter().all(|&(a, b)| graph.is_motif_edge(a, b)))
        .collect();
    if judged.is_empty() {
        return None;
    }
    Some(judged.iter().filter(|&&ok| ok).count() as f64 / judged.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub method: Method,
    pub dataset: String,
    pub fidelity: f64,
    pub mean_size: Option<f64>,
    pub std_size: Option<f64>,
    pub mean_sparsity: Option<f64>,
    pub std_sparsity: Option<f64>,
    pub accuracy: Option<f64>,
    /// `(size, proportion)` over nodes with a counterfactual.
    pub size_histogram: Vec<(usize, f64)>,
    pub n_nodes_evaluated: usize,
    pub n_cfs_found: usize,
    /// Why a metric above is null, one entry per undefined metric.
    pub undefined: Vec<String>,
}

/// Assembles all metrics for one method's records.
pub fn build_report(records: &[NodeRecord], graph: &Graph, method: Method, dataset: &str) -> Result<EvalReport> {
    let fidelity = fidelity(records)?;
    if let Some(r) = records.iter().find(|r| r.method != method) {
        return Err(Error::InvalidConfig(format!(
            "record for node {} is from method {}, expected {method}",
            r.node, r.method
        )));
    }
    let mut undefined = Vec::new();
    let size = explanation_size(records).ok();
    let spars = sparsity(records).ok();
    if size.is_none() {
        undefined.push("size, sparsity: no counterfactual found for any node".to_string());
    }
    let accuracy = accuracy(records, graph);
    if accuracy.is_none() {
        undefined.push("accuracy: no node predicted as a motif class has a counterfactual".to_string());
    }
    Ok(EvalReport {
        method,
        dataset: dataset.to_string(),
        fidelity,
        mean_size: size.as_ref().map(|s| s.mean),
        std_size: size.as_ref().map(|s| s.std),
        mean_sparsity: spars.map(|s| s.0),
        std_sparsity: spars.map(|s| s.1),
        accuracy,
        size_histogram: size.map(|s| s.histogram).unwrap_or_default(),
        n_nodes_evaluated: records.len(),
        n_cfs_found: records.iter().filter(|r| r.found).count(),
        undefined,
    })
}
