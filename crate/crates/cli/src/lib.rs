//! Experiment runner for the `ringmix` toolkit: landscapes, toy-optimizer
//! sweeps, batch mixing and estimate evaluation.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{cmd_evaluate, cmd_landscape, cmd_mix, cmd_optimize, estimate_files, RunReport};
pub use config::ExperimentConfig;
pub use error::CliError;
