//! Command-line front end for the forcepinch engine: batch simulation,
//! calibration, log analysis, curve tables and the interactive session
//! service.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod serve;

pub use app::run;
pub use error::{CliError, CliResult};
