//! Distributed online optimization with bandit feedback, time-varying
//! constraints and compressed communication.
//!
//! Agents on a time-varying directed graph each see a private loss and
//! constraint through value queries only. They exchange quantized iterate
//! increments, mix them with doubly stochastic weights and take projected
//! primal-dual steps built from one- or two-point gradient estimates.

pub mod compression;
pub mod error;
pub mod estimators;
pub mod feasible_set;
pub mod harness;
pub mod metrics;
pub mod parallel;
pub mod primal_dual;
pub mod problems;
pub mod streams;
pub mod topology;

pub use error::{Error, Result};
