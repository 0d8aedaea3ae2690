//! Command-line front end and local HTTP service for imgvc projects.

pub mod api;
mod cli;
pub mod payload;

pub use cli::{parse_op, run, Cli, Command, Env};

/// Port `serve` listens on unless told otherwise.
pub const DEFAULT_PORT: u16 = 8431;
