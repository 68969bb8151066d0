//! Experiment harness for hitnet: configuration, training runs, reports,
//! tables, plots, checkpoints and the `hitnet` command line.

pub mod ablation;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod experiment;
pub mod plots;
pub mod report;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, EvalReport};
