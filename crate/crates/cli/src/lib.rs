//! Configuration-driven pipelines producing CSV and JSON artifacts.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{Command, Pipeline};
