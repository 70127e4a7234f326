//! Sensing-cost analysis for one-sparse signal recovery.
//!
//! The crate builds sensing matrices with the fewest nonzero entries that
//! still separate every one-sparse signal, adaptive bisection plans that do
//! the same job with linear cost, and exact finite-size evaluations of the
//! lower bounds on the nonzero count of any non-adaptive strategy.
//!
//! Modules:
//!
//! - [`numkit`]: binomials, binary entropy, Gaussian tail and its inverse,
//!   and the bracketing inequalities used by the bounds.
//! - [`matrices`]: matrix constructions, l0 accounting and the `SENSEMAT`
//!   text format.
//! - [`channel`]: the measurement model `y = A x + z`, maximum-likelihood
//!   decoding, noisy bisection and Monte Carlo error estimation.
//! - [`bounds`]: exact minimum cost, packing capacities and lower bounds.
//! - [`sweep`]: cost sweeps over the signal dimension with CSV output.

pub mod bounds;
pub mod channel;
mod error;
pub mod matrices;
pub mod numkit;
pub mod sweep;

pub use error::{Error, Result};
