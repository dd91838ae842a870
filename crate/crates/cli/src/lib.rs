//! Scenario loading, artifact writing and the subcommands behind the
//! `layercon` binary.

pub mod commands;
pub mod error;
pub mod output;
pub mod plots;
pub mod scenario;

pub use commands::Context;
pub use error::CliError;
