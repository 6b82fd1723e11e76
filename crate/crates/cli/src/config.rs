//! Run configuration: one TOML document; command-line flags override it.

use std::path::{Path, PathBuf};

use cfgnn_core::{DatasetKind, DatasetSpec, ExplainerConfig, Method, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::formats::read_bytes;

/// Environment variable read for the global seed when neither a flag nor
/// the config file sets one.
pub const SEED_ENV: &str = "CFGNNX_SEED";

/// A dataset entry: a generator kind, a full generator spec, or a graph
/// file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Kind(DatasetKind),
    Spec(DatasetSpec),
    File { path: PathBuf },
}

impl DatasetSource {
    /// Directory name under the run's output directory.
    pub fn label(&self) -> String {
        match self {
            DatasetSource::Kind(k) => k.to_string(),
            DatasetSource::Spec(s) => s.kind.to_string(),
            DatasetSource::File { path } => {
                path.file_stem().map_or_else(|| "graph".into(), |s| s.to_string_lossy().into_owned())
            }
        }
    }
}

/// Training settings; unset fields keep the library defaults. The seed is
/// always derived from the global seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub weight_decay: Option<f64>,
    pub clip_norm: Option<f64>,
    pub restarts: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            weight_decay: self.weight_decay.unwrap_or(d.weight_decay),
            clip_norm: self.clip_norm.unwrap_or(d.clip_norm),
            restarts: self.restarts.unwrap_or(d.restarts),
            seed,
        }
    }

    /// `other`'s set fields win.
    pub fn merge(&self, other: &TrainOverrides) -> TrainOverrides {
        TrainOverrides {
            epochs: other.epochs.or(self.epochs),
            learning_rate: other.learning_rate.or(self.learning_rate),
            weight_decay: other.weight_decay.or(self.weight_decay),
            clip_norm: other.clip_norm.or(self.clip_norm),
            restarts: other.restarts.or(self.restarts),
        }
    }
}

/// Explainer settings applied over the per-dataset defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerOverrides {
    pub iterations: Option<usize>,
    pub beta: Option<f64>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
}

impl ExplainerOverrides {
    pub fn apply(&self, base: ExplainerConfig, seed: u64) -> ExplainerConfig {
        ExplainerConfig {
            iterations: self.iterations.unwrap_or(base.iterations),
            beta: self.beta.unwrap_or(base.beta),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            momentum: self.momentum.unwrap_or(base.momentum),
            seed,
        }
    }

    pub fn merge(&self, other: &ExplainerOverrides) -> ExplainerOverrides {
        ExplainerOverrides {
            iterations: other.iterations.or(self.iterations),
            beta: other.beta.or(self.beta),
            learning_rate: other.learning_rate.or(self.learning_rate),
            momentum: other.momentum.or(self.momentum),
        }
    }

    pub fn is_empty(&self) -> bool {
        *self == ExplainerOverrides::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub global_seed: Option<u64>,
    pub output_dir: PathBuf,
    pub datasets: Vec<DatasetSource>,
    pub methods: Vec<Method>,
    /// Draws per node for the random baseline.
    pub random_trials: usize,
    /// Worker threads for per-node explanation.
    pub jobs: usize,
    pub train: TrainOverrides,
    pub explainer: ExplainerOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            global_seed: None,
            output_dir: PathBuf::from("cfgnnx-run"),
            datasets: DatasetKind::ALL.iter().map(|&k| DatasetSource::Kind(k)).collect(),
            methods: Method::ALL.to_vec(),
            random_trials: 500,
            jobs: 1,
            train: TrainOverrides::default(),
            explainer: ExplainerOverrides::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(read_bytes(path)?).map_err(|e| CliError::invalid(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::invalid(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.methods.is_empty() {
            return usage("methods must not be empty".into());
        }
        if self.datasets.is_empty() {
            return usage("datasets must not be empty".into());
        }
        if self.jobs == 0 || self.random_trials == 0 {
            return usage("jobs and random_trials must be at least 1".into());
        }
        let mut labels: Vec<String> = self.datasets.iter().map(DatasetSource::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return usage(format!("dataset `{}` listed twice", w[0]));
        }
        self.train.apply(0).validate()?;
        self.explainer.apply(cfgnn_core::default_config(DatasetKind::TreeCycles), 0).validate()?;
        Ok(())
    }

    /// Flag, then file, then the environment, then 0.
    pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
        if let Some(s) = flag.or(file) {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={v} is not an integer"))),
            Err(_) => Ok(0),
        }
    }
}
