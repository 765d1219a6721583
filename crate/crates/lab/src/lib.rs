//! Scenario harness for `secantlab-core`: configuration, the built-in
//! catalog, parallel execution, JSON reports, CSV trajectories and binary
//! lattice files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod catalog;
pub mod config;
pub mod export;
pub mod latfile;
pub mod report;
pub mod runner;

pub use catalog::{catalog, catalog_config};
pub use config::{Config, ConfigError, Kind, Scenario};
pub use report::{RunReport, ScenarioReport, Status};
pub use runner::{run, RunOptions};
