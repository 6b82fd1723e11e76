//! Counterfactual explanations for graph convolutional node classifiers.
//!
//! A trained 3-layer GCN is explained one node at a time by learning a
//! binary edge-retention mask over the node's computation subgraph. The
//! smallest edge deletion that flips the prediction is the explanation.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the CLI live in
//! the companion `cfgnnx` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod baselines;
pub mod datasets;
pub mod error;
pub mod explainer;
pub mod gcn;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod seed;

pub use baselines::{explain_keep_1hop, explain_random, explain_rm_1hop, BaselineKind};
pub use datasets::{default_spec, generate, DatasetKind, DatasetSpec};
pub use error::{Error, Result};
pub use explainer::{
    cf_forward, cf_loss, default_config, explain, threshold_mask, CfExample, CfResult, ExplainerConfig,
    PerturbationState,
};
pub use gcn::{forward, grad_check, normalize_adjacency, predict, train, GcnModel, TrainConfig, TrainOutcome};
pub use graph::{degree_stats, edge_list, extract_subgraph, Graph, SubgraphNeighborhood};
pub use linalg::Matrix;
pub use metrics::{build_report, EvalReport, Method, NodeRecord};
