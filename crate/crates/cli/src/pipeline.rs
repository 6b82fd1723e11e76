//! Stage functions shared by the subcommands and the full reproduction run.
//!
//! Each stage draws its randomness from `seed::stream_seed(global, stage)`,
//! so running the stages one by one with a seed gives the same files as
//! `reproduce` with that seed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cfgnn_core::graph::Split;
use cfgnn_core::{
    build_report, default_spec, explain, seed, train, BaselineKind, DatasetKind, EvalReport, ExplainerConfig, GcnModel,
    Method, NodeRecord, TrainConfig,
};
use rayon::prelude::*;

use crate::config::{DatasetSource, RunConfig};
use crate::error::{CliError, Result};
use crate::formats::{
    check_records, load_model, read_json, read_records, save_model, sidecar_path, write_atomic, write_json_pretty,
    write_records, write_report_files, Dataset, TrainMetrics,
};

/// Minimum test accuracy a trained model must reach before it is explained.
pub const ACCURACY_GATE: f64 = 0.87;

pub const STREAM_GENERATE: &str = "generate";
pub const STREAM_TRAIN: &str = "train";
pub const STREAM_EXPLAIN: &str = "explain";

pub fn generate_dataset(kind: DatasetKind, global_seed: u64) -> Result<Dataset> {
    Dataset::from_spec(&default_spec(kind, seed::stream_seed(global_seed, STREAM_GENERATE)))
}

/// Writes the graph and its `.stats.json` sidecar.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    ds.save(path)?;
    write_json_pretty(&sidecar_path(path, "stats.json"), &ds.stats())
}

pub fn train_config(overrides: &crate::config::TrainOverrides, global_seed: u64) -> TrainConfig {
    overrides.apply(seed::stream_seed(global_seed, STREAM_TRAIN))
}

pub fn train_model(ds: &Dataset, config: &TrainConfig) -> Result<(GcnModel, TrainMetrics)> {
    let out = train(&ds.graph, config)?;
    let metrics = TrainMetrics {
        train_acc: out.train_acc,
        test_acc: out.test_acc,
        final_loss: out.final_loss,
        gate: ACCURACY_GATE,
        passed_gate: out.test_acc >= ACCURACY_GATE,
    };
    Ok((out.model, metrics))
}

/// Writes the checkpoint and its `.metrics.json` sidecar.
pub fn save_trained(path: &Path, model: &GcnModel, metrics: &TrainMetrics) -> Result<()> {
    save_model(path, model)?;
    write_json_pretty(&sidecar_path(path, "metrics.json"), metrics)
}

pub fn explainer_config(
    ds: &Dataset,
    overrides: &crate::config::ExplainerOverrides,
    global_seed: u64,
) -> ExplainerConfig {
    overrides.apply(ds.explainer_defaults(), seed::stream_seed(global_seed, STREAM_EXPLAIN))
}

fn check_model(ds: &Dataset, model: &GcnModel) -> Result<()> {
    let g = &ds.graph;
    if model.feature_dim() != g.feature_dim() || model.n_classes != g.n_classes() {
        return Err(CliError::Usage(format!(
            "model expects {} features and {} classes; dataset `{}` has {} and {}",
            model.feature_dim(),
            model.n_classes,
            ds.name,
            g.feature_dim(),
            g.n_classes()
        )));
    }
    Ok(())
}

/// Explains every test node with `method` on `jobs` threads. Records come
/// back ordered by node id whatever the thread count.
pub fn explain_nodes(
    ds: &Dataset,
    model: &GcnModel,
    method: Method,
    config: &ExplainerConfig,
    random_trials: usize,
    jobs: usize,
) -> Result<Vec<NodeRecord>> {
    check_model(ds, model)?;
    config.validate()?;
    let nodes = ds.graph.nodes_in(Split::Test);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let one = |v: usize| -> cfgnn_core::Result<NodeRecord> {
        let g = &ds.graph;
        let r = match method {
            Method::Cf => explain(model, g, v, config)?,
            Method::Random => BaselineKind::Random { trials: random_trials, seed: config.seed }.explain(model, g, v)?,
            Method::Keep1Hop => BaselineKind::Keep1Hop.explain(model, g, v)?,
            Method::Rm1Hop => BaselineKind::Rm1Hop.explain(model, g, v)?,
        };
        Ok(NodeRecord::from_result(method, &r))
    };
    let records = pool.install(|| nodes.par_iter().map(|&v| one(v)).collect::<cfgnn_core::Result<Vec<_>>>())?;
    Ok(records)
}

/// Validates the records against the graph, then computes the metrics.
/// Accuracy needs the motif flags, so graphs without them are rejected.
pub fn evaluate_records(ds: &Dataset, records: &[NodeRecord], source: &Path) -> Result<EvalReport> {
    if !ds.has_ground_truth {
        return Err(CliError::invalid(
            source,
            format!("dataset `{}` has no motif_nodes / motif_edges; accuracy needs them", ds.name),
        ));
    }
    let first = records.first().ok_or_else(|| CliError::invalid(source, "no records"))?;
    check_records(records, &ds.graph).map_err(|m| CliError::invalid(source, m))?;
    Ok(build_report(records, &ds.graph, first.method, &ds.name)?)
}

/// Outcome of one dataset in a reproduction run. Times are `None` for
/// stages loaded from an earlier run.
#[derive(Debug, Clone)]
pub struct DatasetRun {
    pub name: String,
    pub dir: PathBuf,
    pub train: TrainMetrics,
    pub train_secs: Option<f64>,
    pub explain_secs: Vec<(Method, Option<f64>)>,
    pub reports: Vec<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct Reproduction {
    pub runs: Vec<DatasetRun>,
    pub reports: Vec<EvalReport>,
}

fn load_or<T>(
    path: &Path,
    load: impl FnOnce(&Path) -> Result<T>,
    make: impl FnOnce() -> Result<T>,
) -> Result<(T, bool)> {
    if path.exists() {
        Ok((load(path)?, false))
    } else {
        Ok((make()?, true))
    }
}

fn source_dataset(source: &DatasetSource, global_seed: u64) -> Result<Dataset> {
    match source {
        DatasetSource::Kind(k) => generate_dataset(*k, global_seed),
        DatasetSource::Spec(s) => Dataset::from_spec(s),
        DatasetSource::File { path } => Dataset::load(path),
    }
}

/// generate -> train -> explain (every method) -> evaluate, for every
/// dataset. Stage outputs already on disk are reused, so an interrupted
/// run resumes where it stopped; the output directory is bound to the
/// configuration it was started with.
pub fn reproduce(config: &RunConfig, no_gate: bool) -> Result<Reproduction> {
    config.validate()?;
    let global_seed = RunConfig::resolve_seed(None, config.global_seed)?;
    let config = RunConfig { global_seed: Some(global_seed), ..config.clone() };
    let out = &config.output_dir;
    let stamp = out.join("config.toml");
    let text = config.to_toml();
    if stamp.exists() {
        let previous = String::from_utf8_lossy(&crate::formats::read_bytes(&stamp)?).into_owned();
        if previous != text {
            return Err(CliError::Usage(format!(
                "{} holds a run with a different configuration; use another output directory",
                out.display()
            )));
        }
    } else {
        write_atomic(&stamp, text.as_bytes())?;
    }

    let mut runs = Vec::new();
    for source in &config.datasets {
        let dir = out.join(source.label());
        let graph_path = dir.join("graph.json");
        let (ds, fresh) = load_or(&graph_path, Dataset::load, || source_dataset(source, global_seed))?;
        if fresh {
            save_dataset(&ds, &graph_path)?;
        }
        eprintln!("[{}] dataset: {} nodes", ds.name, ds.graph.n_nodes());

        let model_path = dir.join("model.json");
        let metrics_path = sidecar_path(&model_path, "metrics.json");
        let mut train_secs = None;
        let (model, train_metrics) = if model_path.exists() && metrics_path.exists() {
            (load_model(&model_path)?, read_json::<TrainMetrics>(&metrics_path)?)
        } else {
            let t = Instant::now();
            let (model, metrics) = train_model(&ds, &train_config(&config.train, global_seed))?;
            train_secs = Some(t.elapsed().as_secs_f64());
            save_trained(&model_path, &model, &metrics)?;
            (model, metrics)
        };
        eprintln!("[{}] model: train {:.3}, test {:.3}", ds.name, train_metrics.train_acc, train_metrics.test_acc);
        if !train_metrics.passed_gate && !no_gate {
            return Err(CliError::Gate { test_acc: train_metrics.test_acc, gate: ACCURACY_GATE });
        }

        let explainer = explainer_config(&ds, &config.explainer, global_seed);
        let mut reports = Vec::new();
        let mut explain_secs = Vec::new();
        for &method in &config.methods {
            let path = dir.join(format!("results_{method}.jsonl"));
            let t = Instant::now();
            let (records, fresh) = load_or(&path, read_records, || {
                explain_nodes(&ds, &model, method, &explainer, config.random_trials, config.jobs)
            })?;
            if fresh {
                write_records(&path, &records)?;
            }
            explain_secs.push((method, fresh.then(|| t.elapsed().as_secs_f64())));
            let report = evaluate_records(&ds, &records, &path)?;
            eprintln!("[{}] {method}: {} of {} nodes explained", ds.name, report.n_cfs_found, report.n_nodes_evaluated);
            reports.push(report);
        }
        runs.push(DatasetRun { name: ds.name.clone(), dir, train: train_metrics, train_secs, explain_secs, reports });
    }
    let reports: Vec<EvalReport> = runs.iter().flat_map(|r| r.reports.iter().cloned()).collect();
    write_report_files(out, &reports)?;
    Ok(Reproduction { runs, reports })
}
