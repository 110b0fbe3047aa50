//! Actor-critic reinforcement learning with a metacognitive inner loop.
//!
//! The crate provides four layers:
//!
//! - [`approximator`]: small differentiable function approximators (tabular,
//!   linear, feed-forward, gated recurrent) over a flat parameter vector,
//!   with analytic backward passes and a finite-difference oracle.
//! - [`envs`]: episodic environments — a speeded two-alternative
//!   forced-choice task, a grid world, and a Gaussian bandit.
//! - [`agent`]: the Actor (policy head) and Critic (Q and V heads), vanilla
//!   action sampling, and the hypothetical-action inner loop that lets the
//!   agent flag its own choices as suspect before the environment responds.
//! - [`training`]: returns, policy-gradient estimation, control-variate
//!   baselines, critic regression, and the update loop.
//! - [`metacog`]: confusion statistics and sensitivity metrics over the
//!   agent's self-evaluations.

pub mod agent;
pub mod approximator;
pub mod envs;
pub mod error;
pub mod metacog;
pub mod rng;
pub mod testbed;
pub mod training;

pub use error::CoreError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
