//! Command-line privacy accountant for DP-SGD batch samplers, built on
//! `ballsbins-core`.

pub mod account;
pub mod cli;
pub mod error;
pub mod orders;
pub mod output;
pub mod parallel;
pub mod simulate;

pub use cli::{run, Cli};
pub use error::{CliError, Result};
