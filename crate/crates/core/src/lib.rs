//! Multilevel Monte Carlo (MLMC) estimators for expectations of functionals
//! of large random inner products, `E[f(aᵀb)]`, and matrix products,
//! `E[f⊙(AB)]`.
//!
//! The products are never formed in full inside the estimators. Each level
//! approximates them with an index-sampling sketch of `Mˡ` rescaled terms,
//! and consecutive levels share one realization so that the coupled
//! differences have small variance. A standard Monte Carlo baseline at the
//! finest level is provided for cost/accuracy comparison.
//!
//! Module map:
//!
//! - [`tensor`]: dense containers and the exact (expensive) reference products.
//! - [`sampling`]: index distributions and nested realizations.
//! - [`sketch`]: the sampling-and-rescaling estimators.
//! - [`analysis`]: closed-form variance constants, the `f(M)` curve and
//!   brute-force enumeration oracles.
//! - [`planner`]: level count, per-level replications and cost accounting.
//! - [`estimators`]: MLMC and MC estimators.
//! - [`models`]: random data models and target functions.
//! - [`cli`]: experiment sweeps and report writers behind the `mlmc` binary.
//!
//! Replications are evaluated data-parallel with rayon when the `parallel`
//! feature is enabled (the default); every replication owns an RNG substream
//! keyed by `(seed, level, replication)` and reductions run in a fixed order,
//! so results are bit-identical for any thread count.

pub mod analysis;
pub mod cli;
mod error;
pub mod estimators;
pub mod exec;
pub mod models;
pub mod planner;
pub mod rng;
pub mod sampling;
pub mod sketch;
pub mod tensor;

pub use error::{Error, Result};
