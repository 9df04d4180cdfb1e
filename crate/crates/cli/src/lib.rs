//! Pipeline commands behind the `graphlp` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod record;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
