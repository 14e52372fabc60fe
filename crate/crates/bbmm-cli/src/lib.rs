//! Command-line front end: dataset ingestion, train / predict / benchmark /
//! residuals / verify subcommands, and JSON (plus CSV) report emission.

pub mod bessel;
pub mod commands;
pub mod data;
pub mod error;
pub mod report;

pub use bessel::bessel_i;
pub use commands::{
    residual_curve, run_benchmark, run_predict, run_train, verify_theory, RunConfig,
};
pub use data::load_csv;
pub use error::{CliError, Result};
