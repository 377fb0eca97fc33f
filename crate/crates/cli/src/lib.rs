//! Command-line workbench around `weighted-ase`: config-driven simulation,
//! embedding, alignment, Chernoff sweeps, clustering, limit-law checks and
//! edge-weight prediction.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::Context;
pub use config::ExperimentConfig;
pub use error::{CliError, Result};
