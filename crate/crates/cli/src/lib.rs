//! Configuration-driven experiment runner for the `geophase` library.
//!
//! Every experiment writes one long-format CSV, one JSON run manifest
//! holding the fully resolved config, and optional SVG plots.

pub mod config;
pub mod experiments;
pub mod runner;
pub mod svg;
pub mod table;

pub use config::{parse_config, Config, ConfigError, ExperimentKind, Overrides};
pub use runner::{list_experiments, main_with_args, run_config, RunReport};
