//! Batch driver: TOML configuration, run loop, CSV diagnostics and binary
//! checkpoints for the `spinpic` solvers.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod run;

pub use config::{parse_config, ConfigError, SimConfig};
pub use error::RunError;
pub use run::{run, Resume, RunOptions, RunState, RunSummary, Simulation};
