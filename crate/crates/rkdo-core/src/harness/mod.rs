//! Experiment orchestration for the CLI: config parsing, the five
//! subcommands, and deterministic artifact emission.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_compare, cmd_gradcheck, cmd_metrics, cmd_theorem, cmd_train, resolve_out_dir, Fault,
    RunOptions,
};
pub use config::{DatasetKind, ExperimentConfig, SupervisorKind, TrainMethod};
