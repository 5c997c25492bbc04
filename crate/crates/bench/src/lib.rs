//! Experiment harness for model predictive trees and its baselines on the
//! push-car task.

pub mod config;
pub mod experiments;
pub mod seeds;

pub use config::{ExperimentConfig, ExperimentKind, PlannerKind};
pub use experiments::{run_bounds, run_grid, run_job, run_single, run_sweep, EpisodeJob};
pub use seeds::derive_seed;
