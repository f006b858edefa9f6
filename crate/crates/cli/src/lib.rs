//! Command-line front end for the `gpbo` optimizer: JSON configs, built-in
//! benchmark objectives, subprocess evaluators and run artifacts.

pub mod bench;
pub mod config;
pub mod evaluator;
pub mod run;
pub mod triallog;

pub use bench::Builtin;
pub use config::{parse_config, ConfigError, Objective, Overrides, RunConfig};
pub use run::{run, RunError, RunReport};
