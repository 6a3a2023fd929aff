//! Experiment driver: JSON configs in, CSV tables and a run manifest out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{ExperimentConfig, Overrides};
pub use error::{CliError, Result};
