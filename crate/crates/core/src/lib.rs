//! Spectral embedding of weighted graphs under the weighted generalised
//! random dot product graph model, with the asymptotic theory needed to
//! compare edge-weight representations by size-adjusted Chernoff
//! information.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod cluster;
pub mod error;
pub mod linalg;
pub mod model;
pub mod predict;
pub mod represent;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
