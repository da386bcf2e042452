//! Command-line pipeline: extract → learn/sweep → simulate → reconstruct →
//! evaluate, with every stage driven by one JSON config.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
