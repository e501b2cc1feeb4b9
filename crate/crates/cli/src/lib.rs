//! Command-line front end: configuration in engineering units, experiment
//! commands and CSV output.

pub mod commands;
pub mod config;

pub use commands::{run, Command, RunOptions, Table};
pub use config::{ConfigError, ExperimentConfig};
