//! Command-line front end for `cfgnn-core`: dataset generation, training,
//! explanation, evaluation and the full reproduction run, plus the file
//! formats they exchange.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use error::{CliError, Result};
