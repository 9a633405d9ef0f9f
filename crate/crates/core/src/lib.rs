//! Privacy accounting for DP-SGD under Balls-and-Bins, Poisson, Shuffle and
//! Deterministic batch sampling.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerics:
//!
//! - [`num`]: special functions, Bernoulli-KL confidence bounds, binomial
//!   tails, reproducible random streams and exact accumulation.
//! - [`samplers`]: the batch generators themselves.
//! - [`pairs`]: dominating pairs and their privacy loss functions, including
//!   the order-statistics surrogates.
//! - [`mc`]: the Monte Carlo estimator with importance sampling and
//!   order-statistics sampling.
//! - [`analytic`]: closed-form, PLD and lower-bound accountants.
//!
//! IO, parallel execution and the command line live in the `ballsbins` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod error;
pub mod mc;
pub mod num;
pub mod pairs;
pub mod samplers;

pub use error::{Error, Result};
