//! Configuration, execution and output writing for the `disent` binary.

pub mod config;
pub mod error;
pub mod run;
pub mod svg;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
pub use run::{run, RunSummary};
