//! `contact-kinetics` command-line runs: configuration, commands and the JSON/CSV report format.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{cmd_loops, cmd_lutz, cmd_verify, execute, pipeline_config, CliError, Command, LutzArtifacts, RunOutput};
pub use config::{ConfigError, RunConfig, OUT_DIR_ENV};
pub use report::{Certificate, ReportBundle, Relation, SCHEMA};
