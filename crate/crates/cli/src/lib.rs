//! Command-line front end: problem files, subcommands and output formats.

pub mod args;
pub mod commands;
pub mod locate;
pub mod problem;

pub use args::Cli;
pub use commands::{run, CliError};
pub use problem::{Problem, ProblemFile};
