//! Design-based causal inference with random potential outcomes.
//!
//! The crate is organised bottom-up:
//!
//! - [`design`]: Bernoulli randomisation designs, assignment sampling and exact
//!   enumeration of the design law for small `n`.
//! - [`functionals`]: treatment-effect contrasts evaluated exactly by enumeration.
//! - [`representer`]: Riesz representers, both the closed-form Horvitz-Thompson
//!   weight and the Gram-matrix moment-matching construction.
//! - [`depgraph`]: block partitions, dependency graphs and blockwise
//!   Erdős–Rényi interference graphs.
//! - [`dgp`]: the baseline and network-spillover data-generating processes.
//! - [`estimator`]: the aggregate Riesz estimator, residuals, variance
//!   estimators and normal-theory inference.
//! - [`montecarlo`]: the replication harness and the brute-force oracle suite.
//! - [`cli`]: config parsing, results CSV and the subcommand drivers behind the
//!   `riesz-rpo` binary.

pub mod cli;
pub mod depgraph;
pub mod design;
pub mod dgp;
mod error;
pub mod estimator;
pub mod functionals;
pub mod montecarlo;
pub mod normal;
pub mod representer;
pub mod rng;

pub use error::{Error, Result};
