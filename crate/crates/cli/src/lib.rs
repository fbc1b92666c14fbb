//! Library side of the `annulus-kit` command-line tool: run configuration,
//! command implementations and the invariant suite.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod verify;

pub use cli::{execute, Cli};
pub use config::{KernelSpec, RunConfig, WeightSpec};
pub use error::CliError;
