//! Average Age of Incorrect Information (AoII) for status-update systems with
//! state-dependent age growth, computed from hybrid-system models and checked
//! by simulation.
//!
//! - [`shs`] is the generic engine: build a model, then solve for the
//!   stationary distribution and the expected age per state.
//! - [`noisy`] and [`collision`] build the two channel models and carry their
//!   closed-form results.
//! - [`stability`] decides whether the expected ages are finite.
//! - [`baselines`] holds the classical M/M/1/1 age formulas.
//! - [`sim`] is a Monte Carlo simulator for any model.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod collision;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod noisy;
pub mod shs;
pub mod sim;
pub mod stability;

pub use error::{Error, Result};
pub use exec::Execution;
