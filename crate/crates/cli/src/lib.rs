//! Library side of the `hardi` command-line tool: experiment configuration,
//! the shared pipeline and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod pipeline;
