//! Command-line front end for `dsa_core`: count-file ingestion, run
//! configuration and the `simulate`, `fit`, `replicate` and `tau` commands.

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, Result};
