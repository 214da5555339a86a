//! Configuration parsing, artifact writing and orchestration behind the
//! `paqs-sim` binary.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_str, ConfigError, RawConfig, RunConfig};
pub use run::{run, CliError, CliOptions, RunManifest, Subcommand};
