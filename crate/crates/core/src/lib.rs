//! Non-adaptive Bernoulli group testing under dilution noise.
//!
//! The crate is split by role:
//!
//! - [`model`]: problem parameters, Bernoulli design matrices and the two test
//!   channels (noiseless OR, per-entry dilution).
//! - [`decode`]: the NCOMP threshold decoder, its optimal slack, and an
//!   exhaustive maximum-likelihood decoder for tiny instances.
//! - [`bounds`]: closed-form achievability and converse test counts, rates,
//!   binary entropy, the Poisson entropy expectation and binomial tail bounds.
//! - [`harness`]: a seeded, parallel Monte Carlo runner that estimates the
//!   exact-recovery error probability.
//!
//! Every random draw is a pure function of a [`SeedSpec`], so results do not
//! depend on thread count or evaluation order.

pub mod bounds;
pub mod decode;
mod error;
pub mod harness;
pub mod model;
mod rng;

pub use error::{Error, Result};
pub use model::{
    AlphaMode, DefectiveSet, DesignMatrix, OutcomeVector, ProblemParams, SeedSpec,
};
