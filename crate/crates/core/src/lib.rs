//! Urban-intersection simulator for co-training a self-driving car (SDC) and
//! twelve trait-driven pedestrians with a centralized-critic PPO, plus the
//! trajectory metrics that compare crosswalk crossings with jaywalking.

pub mod baselines;
pub mod cli;
pub mod config;
pub mod env;
mod error;
pub mod geometry;
pub mod map;
pub mod metrics;
pub mod nets;
pub mod physics;
pub mod selfcheck;
pub mod trainer;

pub use error::{Error, Result};
