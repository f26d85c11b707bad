#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Truncated covariance-penalized-error (CPE) Bayesian hierarchical models
//! for Gaussian data.
//!
//! The posterior of a Gaussian hierarchical model is restricted to the set of
//! parameter values whose CPE, evaluated at the BLUP, falls below a
//! threshold `kappa`. The crate provides the criteria, the predictors, a
//! constraint-filtered Gibbs sampler for an exponential-covariance spatial
//! model, Bayesian model averaging over linear models, and reproducible
//! experiment runners.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod bma;
pub mod cli;
pub mod criteria;
pub mod error;
pub mod experiments;
pub mod io;
pub mod predictors;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
