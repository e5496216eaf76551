//! Std companion to `paq-core`: configuration, file formats, the benchmark
//! harness and the `paq` command-line tool.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cache;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod parallel;

pub use error::{CliError, CliResult};
