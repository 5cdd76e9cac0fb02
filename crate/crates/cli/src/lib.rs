//! Command-line front end: config loading, study runs, theoretical curves,
//! basis dumps and the invariant suites.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Cli, Command, Format};
pub use error::CliError;
