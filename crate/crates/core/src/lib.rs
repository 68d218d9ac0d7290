//! Population synthesis with marginal transfer.
//!
//! A Bayesian network copula is learned on ECDF-normalized source microdata
//! and combined with target one-way marginals through pseudo-inverse
//! transforms. Baseline generators (independent marginals, IPF, a plain
//! Bayesian network) and the evaluation metrics live alongside it.

pub mod baselines;
pub mod bayesnet;
pub mod cli;
pub mod copula;
pub mod dataset;
pub mod error;
pub mod ipf;
pub mod metrics;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
