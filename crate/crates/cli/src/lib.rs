//! Command-line front end: experiment configs in, trajectories and verdict
//! reports out.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{load_config, load_config_with, ExperimentConfig, GossipProbs, RawConfig};
pub use error::CliError;
