//! Batch driver for the `vrm-core` experiments: a JSON run configuration in,
//! JSON summaries and CSV tables out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod runner;

pub use config::{ExperimentId, Overrides, RunConfig};
pub use error::CliError;
