//! File-driven experiments on top of `hypiss_core`: JSON configs and
//! certificates, CSV trajectories, and the `hypiss` command line.

pub mod certificate;
pub mod commands;
pub mod config;
pub mod output;
pub mod report;

pub use commands::{CliError, CommonArgs, GainSource, EXIT_ERROR, EXIT_FAILED, EXIT_OK};
pub use report::RunReport;
