//! AdaGradNorm-family first-order methods on unconstrained problems.
//!
//! The crate is split along the lines of a convergence study:
//!
//! - [`problems`]: objective oracles with a known optimum and samplers that
//!   check the regularity conditions (quasar convexity, weak/standard/diagonal
//!   smoothness) on a box.
//! - [`noise`]: a sub-Gaussian stochastic gradient oracle with an analytically
//!   certified parameter.
//! - [`optimizers`]: the seven update rules behind one run loop that records a
//!   full [`Trace`](optimizers::Trace).
//! - [`bounds`]: evaluators for every closed-form envelope and a binder that
//!   compares a trace against the matching envelope.
//! - [`analysis`]: trace statistics, log-log rate fits, event frequencies and
//!   the scale-invariance probe.

pub mod analysis;
pub mod bounds;
mod error;
pub mod linalg;
pub mod noise;
pub mod optimizers;
pub mod problems;

pub use error::{Error, Result};
