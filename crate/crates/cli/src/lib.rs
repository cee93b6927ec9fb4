//! Command-line front end of the kpzlab experiments: configuration layering,
//! subcommand runners and CSV/JSON output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Experiment, Outcome};
pub use config::{ExperimentConfig, Overrides};
pub use error::CliError;
