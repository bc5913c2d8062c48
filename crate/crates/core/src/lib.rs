//! Solvers and pathwise verification for zero-sum Dynkin games with
//! risk-sensitive criteria where each player may stop only at the arrival
//! times of their own Poisson signal stream.
//!
//! The library computes the game value by integrating the characterizing
//! penalized terminal-value equation backward in time (ODE, explicit finite
//! differences, or regression Monte Carlo), simulates the game pathwise under
//! the optimal threshold strategies, and cross-verifies the value through the
//! dynamic-programming recursion at merged signal times and the
//! randomized-stopping differential-game representation.

pub mod error;
pub mod experiment;
pub mod game;
pub mod model;
pub mod payoff;
pub mod quad;
pub mod report;
pub mod risk;
pub mod rng;
pub mod sdg;
pub mod signals;
pub mod solver;
pub(crate) mod util;

pub use error::{Error, Result};
pub use model::{Dynamics, MarkovModel};
pub use payoff::{Obstacle, PayoffBundle, PayoffMap, StatePath};
pub use risk::RiskFunction;
pub use solver::{SolveMode, ValueSurface};
