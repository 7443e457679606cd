//! Command-line driver: configuration, parallel execution, CSV/SVG output
//! and run manifests.

// `!(x > 0.0)` is used on purpose: it rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod svg;

pub use cli::run;
pub use error::CliError;
