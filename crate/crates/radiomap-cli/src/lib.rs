//! Configuration, file formats and subcommands of the `radiomap` tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
