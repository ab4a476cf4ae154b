//! Configuration, commands and file output of the `cmcfoliate` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod selftest;

pub use commands::{exit_code, load_context, Context, Outcome, RunReport};
pub use config::RunConfig;
