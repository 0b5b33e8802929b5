//! Batch front-end for the two-fluid laboratory: configuration and task runs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod campaign;
pub mod config;

pub use campaign::{run_campaign, CliError, Outcome};
pub use config::{parse_config, ConfigError, RunConfig, Task};
