//! Long-term treatment effects from short-term panel experiments.
//!
//! Modules:
//! - [`panel`]: data model, CSV ingestion, randomization checks.
//! - [`numerics`]: least squares, elastic net, test statistics, seeded streams.
//! - [`estimators`]: linear surrogate model, discrete and additive plug-ins, kNN, CEB, VAR.
//! - [`inference`]: permutation test and bootstrap bands.
//! - [`validation`]: comparability, parallel trends, sensitivity analyses.
//! - [`synthgen`]: synthetic generators with effect truth.
//! - [`cli`]: configuration and command implementations behind the `longsurr` binary.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cli;
pub mod error;
pub mod inference;
pub mod estimators;
pub mod numerics;
pub mod panel;
pub mod synthgen;
pub mod validation;

pub use error::{Error, Result};
