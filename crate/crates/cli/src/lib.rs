//! Scenario files and subcommands of the `erlang-rain` tool.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{load_scenario, resolve, Overrides, PolicyKind, Profile, Scenario};
pub use error::CliError;
