//! Command-line front end: config loading and the `decode`, `bench`,
//! `inject-study` and `sweep` commands.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{main_with_args, run, Command};
pub use config::{load_config, EngineConfig, Overrides, REMOTE_URL_ENV};
pub use error::CliError;
