//! Command-line driver for the discrete and continuous pipelines.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

pub use config::RunConfig;
pub use error::CliError;
