//! On-disk formats: graph JSON with a stats sidecar, model checkpoints,
//! JSON-lines result records and the evaluation reports.
//!
//! Every writer is deterministic: the same value always produces the same
//! bytes. Floats use the shortest representation that parses back to the
//! same bits.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cfgnn_core::explainer::SUBGRAPH_HOPS;
use cfgnn_core::graph::{Edge, Split};
use cfgnn_core::{
    default_config, degree_stats, extract_subgraph, generate, DatasetKind, DatasetSpec, EvalReport, ExplainerConfig,
    GcnModel, Graph, Matrix, Method, NodeRecord,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Writes through a sibling temp file and a rename, so a killed run never
/// leaves a truncated file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = Path::new(&tmp);
    fs::write(tmp, bytes).map_err(|e| CliError::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Compact JSON plus a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec(value).map_err(|e| CliError::invalid(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::invalid(path, e))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_bytes(path)?).map_err(|e| CliError::invalid(path, e))
}

/// Graph document. Edges are undirected and listed once with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    /// Generator parameters, when the graph came from `generate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<DatasetSpec>,
    pub n: usize,
    /// Defaults to one more than the largest label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
    pub edges: Vec<Edge>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motif_nodes: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motif_edges: Option<Vec<Edge>>,
    pub split: Vec<Split>,
}

/// A graph plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub spec: Option<DatasetSpec>,
    pub graph: Graph,
    /// False when the file carried no motif flags.
    pub has_ground_truth: bool,
}

impl Dataset {
    pub fn from_spec(spec: &DatasetSpec) -> Result<Self> {
        Ok(Self {
            name: spec.kind.to_string(),
            spec: Some(spec.clone()),
            graph: generate(spec)?,
            has_ground_truth: true,
        })
    }

    pub fn kind(&self) -> Option<DatasetKind> {
        self.spec.as_ref().map(|s| s.kind)
    }

    /// Per-dataset explainer defaults; graphs without a generator spec get
    /// the tree-dataset settings.
    pub fn explainer_defaults(&self) -> ExplainerConfig {
        default_config(self.kind().unwrap_or(DatasetKind::TreeCycles))
    }

    pub fn to_file(&self) -> GraphFile {
        let g = &self.graph;
        let features = (0..g.n_nodes()).map(|v| g.features().row(v).to_vec()).collect();
        GraphFile {
            spec: self.spec.clone(),
            n: g.n_nodes(),
            n_classes: Some(g.n_classes()),
            edges: g.edges(),
            features,
            labels: g.labels().to_vec(),
            motif_nodes: self.has_ground_truth.then(|| g.motif_nodes().to_vec()),
            motif_edges: self.has_ground_truth.then(|| g.motif_edges().iter().copied().collect()),
            split: g.split().to_vec(),
        }
    }

    pub fn from_file(file: GraphFile, name: String, path: &Path) -> Result<Self> {
        let bad = |msg: String| CliError::invalid(path, msg);
        if file.features.len() != file.n {
            return Err(bad(format!("{} feature rows for {} nodes", file.features.len(), file.n)));
        }
        let p = file.features.first().map_or(0, Vec::len);
        if p == 0 || file.features.iter().any(|r| r.len() != p) {
            return Err(bad("feature rows must be non-empty and of equal length".into()));
        }
        if let Some((i, j)) = file.edges.iter().find(|(i, j)| i >= j) {
            return Err(bad(format!("edge [{i}, {j}] must be listed once with i < j")));
        }
        let n_classes = file.n_classes.unwrap_or_else(|| file.labels.iter().max().map_or(1, |m| m + 1));
        let features = Matrix::from_vec(file.n, p, file.features.concat())?;
        let has_ground_truth = file.motif_nodes.is_some() && file.motif_edges.is_some();
        let graph = Graph::new(
            file.n,
            &file.edges,
            features,
            file.labels,
            n_classes,
            file.motif_nodes.unwrap_or_else(|| vec![false; file.n]),
            &file.motif_edges.unwrap_or_default(),
            file.split,
        )
        .map_err(|e| bad(e.to_string()))?;
        Ok(Self { name, spec: file.spec, graph, has_ground_truth })
    }

    /// The name is the generator kind, or the file stem for other graphs.
    pub fn load(path: &Path) -> Result<Self> {
        let file: GraphFile = read_json(path)?;
        let name = match &file.spec {
            Some(spec) => spec.kind.to_string(),
            None => path.file_stem().map_or_else(|| "graph".into(), |s| s.to_string_lossy().into_owned()),
        };
        Self::from_file(file, name, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_file())
    }

    pub fn stats(&self) -> DatasetStats {
        let g = &self.graph;
        let degree = degree_stats(g);
        let (mut sub_nodes, mut sub_edges) = (0usize, 0usize);
        for v in 0..g.n_nodes() {
            let sub = extract_subgraph(g, v, SUBGRAPH_HOPS).expect("node in range");
            sub_nodes += sub.n_nodes();
            sub_edges += sub.edges().len();
        }
        let n = g.n_nodes().max(1) as f64;
        DatasetStats {
            dataset: self.name.clone(),
            nodes: g.n_nodes(),
            undirected_edges: g.edges().len(),
            directed_edges: degree.n_edges_directed,
            avg_degree: degree.avg_degree,
            n_classes: g.n_classes(),
            motif_nodes: g.motif_nodes().iter().filter(|&&m| m).count(),
            motif_edges: g.motif_edges().len(),
            train_nodes: g.nodes_in(Split::Train).len(),
            test_nodes: g.nodes_in(Split::Test).len(),
            subgraph_hops: SUBGRAPH_HOPS,
            avg_subgraph_nodes: sub_nodes as f64 / n,
            avg_subgraph_edges: sub_edges as f64 / n,
        }
    }
}

/// Sidecar written next to a generated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub dataset: String,
    pub nodes: usize,
    pub undirected_edges: usize,
    /// Nonzero adjacency entries.
    pub directed_edges: usize,
    pub avg_degree: f64,
    pub n_classes: usize,
    pub motif_nodes: usize,
    pub motif_edges: usize,
    pub train_nodes: usize,
    pub test_nodes: usize,
    pub subgraph_hops: usize,
    /// Averages over all nodes of the computation subgraph.
    pub avg_subgraph_nodes: f64,
    pub avg_subgraph_edges: f64,
}

/// `foo/graph.json` -> `foo/graph.<suffix>`.
pub fn sidecar_path(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    /// `[rows, cols]` of the row-major `weights`.
    pub shape: [usize; 2],
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerFile {
    fn new(w: &Matrix, b: &[f64]) -> Self {
        Self { shape: [w.rows(), w.cols()], weights: w.as_slice().to_vec(), bias: b.to_vec() }
    }

    fn matrix(&self) -> cfgnn_core::Result<Matrix> {
        Matrix::from_vec(self.shape[0], self.shape[1], self.weights.clone())
    }
}

/// Model checkpoint; round-trips bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub feature_dim: usize,
    pub n_classes: usize,
    pub conv: Vec<LayerFile>,
    /// Head over the concatenated convolution outputs.
    pub output: LayerFile,
}

impl CheckpointFile {
    pub fn from_model(model: &GcnModel) -> Self {
        Self {
            feature_dim: model.feature_dim(),
            n_classes: model.n_classes,
            conv: model.conv_weights.iter().zip(&model.conv_biases).map(|(w, b)| LayerFile::new(w, b)).collect(),
            output: LayerFile::new(&model.out_weight, &model.out_bias),
        }
    }

    pub fn to_model(&self) -> cfgnn_core::Result<GcnModel> {
        let model = GcnModel {
            conv_weights: self.conv.iter().map(LayerFile::matrix).collect::<cfgnn_core::Result<_>>()?,
            conv_biases: self.conv.iter().map(|l| l.bias.clone()).collect(),
            out_weight: self.output.matrix()?,
            out_bias: self.output.bias.clone(),
            n_classes: self.n_classes,
        };
        model.validate()?;
        if model.feature_dim() != self.feature_dim {
            return Err(cfgnn_core::Error::Shape(format!(
                "first layer reads {} features, header says {}",
                model.feature_dim(),
                self.feature_dim
            )));
        }
        Ok(model)
    }
}

pub fn save_model(path: &Path, model: &GcnModel) -> Result<()> {
    write_json(path, &CheckpointFile::from_model(model))
}

pub fn load_model(path: &Path) -> Result<GcnModel> {
    let file: CheckpointFile = read_json(path)?;
    file.to_model().map_err(|e| CliError::invalid(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub train_acc: f64,
    pub test_acc: f64,
    pub final_loss: f64,
    pub gate: f64,
    pub passed_gate: bool,
}

/// One JSON object per line, in the given order.
pub fn write_records(path: &Path, records: &[NodeRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| CliError::invalid(path, e))?;
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

pub fn read_records(path: &Path) -> Result<Vec<NodeRecord>> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::invalid(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::invalid(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Checks that records describe valid deletions on `graph`: one method,
/// strictly increasing node ids, and for every found counterfactual a
/// changed class and a removed-edge list of matching size made of graph
/// edges.
pub fn check_records(records: &[NodeRecord], graph: &Graph) -> Result<(), String> {
    let edges: BTreeSet<Edge> = graph.edges().into_iter().collect();
    for (k, r) in records.iter().enumerate() {
        let at = format!("node {}", r.node);
        if r.node >= graph.n_nodes() {
            return Err(format!("{at}: out of range for {} nodes", graph.n_nodes()));
        }
        if k > 0 && records[k - 1].node >= r.node {
            return Err(format!("{at}: records must be sorted by node id without repeats"));
        }
        if r.method != records[0].method {
            return Err(format!("{at}: method {} differs from {}", r.method, records[0].method));
        }
        if r.original_class >= graph.n_classes() {
            return Err(format!("{at}: class {} out of range", r.original_class));
        }
        match (r.found, r.new_class, &r.removed_edges, r.size) {
            (false, None, None, None) => {}
            (true, Some(c), Some(removed), Some(size)) => {
                if c == r.original_class || c >= graph.n_classes() {
                    return Err(format!("{at}: new class {c} is not a different class"));
                }
                if removed.len() != size || size == 0 {
                    return Err(format!("{at}: size {size} but {} removed edges", removed.len()));
                }
                if let Some(e) = removed.iter().find(|e| !edges.contains(e)) {
                    return Err(format!("{at}: removed edge {e:?} is not a graph edge"));
                }
            }
            _ => return Err(format!("{at}: `found` disagrees with new_class / removed_edges / size")),
        }
    }
    Ok(())
}

pub fn write_reports(path: &Path, reports: &[EvalReport]) -> Result<()> {
    write_json_pretty(path, &reports)
}

#[derive(Serialize)]
struct TableRow<'a> {
    method: Method,
    dataset: &'a str,
    fidelity: f64,
    size_mean: Option<f64>,
    size_std: Option<f64>,
    sparsity_mean: Option<f64>,
    sparsity_std: Option<f64>,
    accuracy: Option<f64>,
}

/// Flat table, one row per report; undefined metrics are empty cells.
pub fn table_csv(reports: &[EvalReport]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        w.serialize(TableRow {
            method: r.method,
            dataset: &r.dataset,
            fidelity: r.fidelity,
            size_mean: r.mean_size,
            size_std: r.std_size,
            sparsity_mean: r.mean_sparsity,
            sparsity_std: r.std_sparsity,
            accuracy: r.accuracy,
        })?;
    }
    w.flush()?;
    Ok(w.into_inner().expect("flushed"))
}

/// `size,proportion` rows for one report.
pub fn histogram_csv(report: &EvalReport) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["size", "proportion"])?;
    for &(size, p) in &report.size_histogram {
        w.serialize((size, p))?;
    }
    w.flush()?;
    Ok(w.into_inner().expect("flushed"))
}

/// Writes `report.json`, `table.csv` and `histograms/<dataset>_<method>.csv`
/// under `dir`.
pub fn write_report_files(dir: &Path, reports: &[EvalReport]) -> Result<()> {
    write_reports(&dir.join("report.json"), reports)?;
    let table = dir.join("table.csv");
    write_atomic(&table, &table_csv(reports).map_err(|e| CliError::invalid(&table, e))?)?;
    for r in reports {
        let path = dir.join("histograms").join(format!("{}_{}.csv", r.dataset, r.method));
        write_atomic(&path, &histogram_csv(r).map_err(|e| CliError::invalid(&path, e))?)?;
    }
    Ok(())
}

/// Plain-text rendering of a report table for the terminal.
pub fn render_table(reports: &[EvalReport]) -> String {
    let cell = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12} {:<10} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "dataset", "method", "fidelity", "size", "size_sd", "sparsity", "accuracy"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<12} {:<10} {:>8.3} {:>8} {:>8} {:>8} {:>8}",
            r.dataset,
            r.method.as_str(),
            r.fidelity,
            cell(r.mean_size),
            cell(r.std_size),
            cell(r.mean_sparsity),
            cell(r.accuracy)
        );
    }
    s
}
