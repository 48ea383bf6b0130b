//! Experiment runner for `slowvary-core`: graph and family files, JSON
//! configs, CSV traces and run manifests.

pub mod config;
pub mod error;
pub mod graph_io;
pub mod output;
pub mod run;

pub use config::{read_config, ExperimentConfig};
pub use error::{RunError, RunResult};
pub use output::Artifacts;
pub use run::run_experiment;
