//! Batched Bayesian optimization with planned routes through each batch.
//!
//! A Gaussian-process surrogate drives batched Thompson sampling, batched UCB
//! or pure exploration over a finite candidate grid; each batch is visited
//! along an MST-based tour improved by 2-opt, so the traveler pays for
//! movement as well as regret. The same routing wraps batched successive
//! elimination for finite-armed and Lipschitz bandits.

pub mod bandit_ext;
pub mod domain;
pub mod error;
pub mod harness;
pub mod policies;
pub mod rng;
pub mod routing;
pub mod surrogate;
pub mod testbed;

pub use domain::BoxDomain;
pub use error::{Error, Result};
