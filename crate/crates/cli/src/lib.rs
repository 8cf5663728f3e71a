//! Declarative experiment runner for `levolve-core`.
//!
//! A TOML configuration names a geometry, initial densities and a list of
//! monitors. [`run_experiment`] evaluates the monitors and
//! [`write_artifacts`] emits one CSV per series, `report.txt`,
//! `summary.json` and optional SVG plots.

pub mod config;
pub mod plot;
pub mod runner;

pub use config::{check, parse_config, validate_config, ConfigError, ExperimentConfig};
pub use runner::{run_experiment, write_artifacts, MonitorOutcome, RunReport};
