//! Generic finite-state stochastic hybrid system engine.
//!
//! A model is a continuous-time Markov chain over discrete states, plus an
//! age vector that grows between jumps according to the current state and is
//! linearly reset at every jump. The stationary expectation of that vector
//! per state solves a linear system assembled here.

mod ages;
mod balance;
mod model;

pub use ages::{
    average_aoii, expected_age_vectors, system_matrix, AgeVectorSet, SystemMatrix, Unknown,
    NEGATIVE_TOLERANCE,
};
pub use balance::{stationary_distribution, StationaryDistribution};
pub use model::{build_model, GrowthRate, ResetMap, ShsModel, Transition};
