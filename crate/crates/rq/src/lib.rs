//! Command-line pipeline around `rq-core`: configuration files, checkpoints,
//! CSV reports and a multi-threaded robustness sweep.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

pub use error::{CliError, FormatError, Result};
