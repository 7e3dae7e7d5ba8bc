//! Experiment runner, results store, rate fits, figures and the acceptance
//! suite for the `circlaw` library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod figures;
pub mod fit;
pub mod runner;
pub mod store;

pub use config::{ExperimentConfig, Metric, SolverParams};
pub use fit::{fit_rate, RateFit};
pub use runner::{run_experiment, run_id};
pub use store::{ResultsStore, RunRecord};
