//! Argument parsing and the five subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use cfgnn_core::{DatasetKind, Method};
use clap::{Args, Parser, Subcommand};

use crate::config::{ExplainerOverrides, RunConfig, TrainOverrides};
use crate::error::{CliError, Result, EXIT_USAGE};
use crate::formats::{load_model, read_records, render_table, write_records, write_report_files, Dataset};
use crate::pipeline::{self, ACCURACY_GATE};

#[derive(Debug, Parser)]
#[command(name = "cfgnnx", version, about = "Counterfactual edge-deletion explanations for GCN node classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic benchmark graph and its stats sidecar.
    Generate(GenerateArgs),
    /// Train the GCN and write a checkpoint plus accuracy metrics.
    Train(TrainArgs),
    /// Explain every test node with one method, as JSON lines.
    Explain(ExplainArgs),
    /// Compute metrics for result files and write JSON/CSV reports.
    Evaluate(EvaluateArgs),
    /// Run every stage for every configured dataset and method.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// tree-cycles, tree-grid or ba-shapes.
    kind: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to `<kind>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainFlags {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
}

impl TrainFlags {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            clip_norm: self.clip_norm,
            restarts: self.restarts,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// TOML run config; only `global_seed` and `[train]` are read.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Succeed even if test accuracy is below the gate.
    #[arg(long)]
    no_gate: bool,
}

#[derive(Debug, Args)]
struct ExplainFlags {
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
}

impl ExplainFlags {
    fn overrides(&self) -> ExplainerOverrides {
        ExplainerOverrides {
            iterations: self.iterations,
            beta: self.beta,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
        }
    }
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// cf, random, keep_1hop or rm_1hop.
    #[arg(long)]
    method: Method,
    /// TOML run config; `global_seed`, `random_trials`, `jobs` and
    /// `[explainer]` are read.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: ExplainFlags,
    /// Draws per node for the random baseline.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Defaults to `results_<method>.jsonl`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// JSON-lines result files, one method each.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of the generated benchmarks.
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<DatasetKind>>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    no_gate: bool,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
}

fn cmd_generate(args: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let kind: DatasetKind = args.kind.parse().map_err(|_| {
        CliError::Usage(format!("unknown dataset kind `{}` (expected tree-cycles, tree-grid or ba-shapes)", args.kind))
    })?;
    let seed = RunConfig::resolve_seed(args.seed, None)?;
    let path = args.out.unwrap_or_else(|| PathBuf::from(format!("{kind}.json")));
    let ds = pipeline::generate_dataset(kind, seed)?;
    pipeline::save_dataset(&ds, &path)?;
    let s = ds.stats();
    let _ = writeln!(
        out,
        "{}: {} nodes, {} edges ({} directed), avg degree {:.2}",
        s.dataset, s.nodes, s.undirected_edges, s.directed_edges, s.avg_degree
    );
    let _ = writeln!(out, "motifs: {} nodes, {} edges; classes {}", s.motif_nodes, s.motif_edges, s.n_classes);
    let _ = writeln!(
        out,
        "avg computation subgraph ({} hops): {:.2} nodes, {:.2} edges",
        s.subgraph_hops, s.avg_subgraph_nodes, s.avg_subgraph_edges
    );
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(())
}

fn cmd_train(args: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let file = load_config(args.config.as_deref())?;
    let seed = RunConfig::resolve_seed(args.seed, file.global_seed)?;
    let config = pipeline::train_config(&file.train.merge(&args.flags.overrides()), seed);
    config.validate()?;
    let ds = Dataset::load(&args.dataset)?;
    let (model, metrics) = pipeline::train_model(&ds, &config)?;
    pipeline::save_trained(&args.out, &model, &metrics)?;
    let _ = writeln!(out, "train accuracy {:.4}, test accuracy {:.4}", metrics.train_acc, metrics.test_acc);
    let _ = writeln!(out, "wrote {}", args.out.display());
    if !metrics.passed_gate && !args.no_gate {
        return Err(CliError::Gate { test_acc: metrics.test_acc, gate: ACCURACY_GATE });
    }
    Ok(())
}

fn cmd_explain(args: ExplainArgs, out: &mut dyn Write) -> Result<()> {
    let flags = args.flags.overrides();
    if args.method != Method::Cf && !flags.is_empty() {
        return Err(CliError::Usage(format!(
            "--iterations/--beta/--learning-rate/--momentum apply to cf, not {}",
            args.method
        )));
    }
    if args.method != Method::Random && args.trials.is_some() {
        return Err(CliError::Usage(format!("--trials applies to random, not {}", args.method)));
    }
    let file = load_config(args.config.as_deref())?;
    let seed = RunConfig::resolve_seed(args.seed, file.global_seed)?;
    let ds = Dataset::load(&args.dataset)?;
    let model = load_model(&args.checkpoint)?;
    let config = pipeline::explainer_config(&ds, &file.explainer.merge(&flags), seed);
    let trials = args.trials.unwrap_or(file.random_trials);
    let jobs = args.jobs.unwrap_or(file.jobs);
    if trials == 0 || jobs == 0 {
        return Err(CliError::Usage("--trials and --jobs must be at least 1".into()));
    }
    let records = pipeline::explain_nodes(&ds, &model, args.method, &config, trials, jobs)?;
    let path = args.out.unwrap_or_else(|| PathBuf::from(format!("results_{}.jsonl", args.method)));
    write_records(&path, &records)?;
    let found = records.iter().filter(|r| r.found).count();
    let _ = writeln!(out, "{}: {found} of {} nodes have a counterfactual", args.method, records.len());
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let ds = Dataset::load(&args.dataset)?;
    let mut reports = Vec::new();
    for path in &args.results {
        let records = read_records(path)?;
        reports.push(pipeline::evaluate_records(&ds, &records, path)?);
    }
    write_report_files(&args.out_dir, &reports)?;
    let _ = write!(out, "{}", render_table(&reports));
    Ok(())
}

fn cmd_reproduce(args: ReproduceArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(kinds) = args.datasets {
        config.datasets = kinds.into_iter().map(crate::config::DatasetSource::Kind).collect();
    }
    if let Some(dir) = args.out_dir {
        config.output_dir = dir;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    config.global_seed = Some(RunConfig::resolve_seed(args.seed, config.global_seed)?);
    let run = pipeline::reproduce(&config, args.no_gate)?;
    let _ = write!(out, "{}", render_table(&run.reports));
    let _ = writeln!(out, "wrote {}", config.output_dir.join("report.json").display());
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 usage or validation, 2 accuracy gate,
/// 3 I/O.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Explain(a) => cmd_explain(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Reproduce(a) => cmd_reproduce(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
