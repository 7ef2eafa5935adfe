//! Experiment harness: configuration, runs and their artifacts, comparisons.

pub mod compare;
pub mod config;
pub mod run;
pub mod selfcheck;

pub use crate::dynamics::{boundary_fraction, MetricsRow};
pub use compare::{compare_runs, Comparison};
pub use config::{preset, preset_names, InitSpec, ObjectiveSpec, OracleSpec, OutputSpec, RunConfig, SamplerSpec};
pub use run::{run_experiment, simulate, RunResult, RunSummary};
