//! Policy search by Bayesian optimization whose response surface uses a
//! learned-dynamics cost estimate as its prior mean, along with the pure
//! model-based, pure model-free and switch-over baselines.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bayesopt;
pub mod direct;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod gp;
pub mod harness;
pub mod seed;

pub use error::{Error, Result};
