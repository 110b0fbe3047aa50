//! Episodic environments.
//!
//! All environments speak the same interface: encoded observation vectors
//! in, discrete action indices out. Ground-truth annotations (which side
//! held the signal, whether the submitted action was optimal) travel in
//! [`StepInfo`]; they exist for analysis only and are never fed back to the
//! agent.

mod bandit;
mod grid_world;
mod two_afc;

pub use bandit::{Bandit, BanditConfig};
pub use grid_world::{solve_grid, GridSolution, GridWorld, GridWorldConfig};
pub use two_afc::{
    dprime_of_config, Dprime, Observation, Phase, Side, TwoAfc, TwoAfcConfig, ACTION_LEFT,
    ACTION_RIGHT, ACTION_WAIT,
};

use crate::Result;

/// Ground-truth annotations attached to a step. Hidden from the agent.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct StepInfo {
    /// Whether the submitted action was correct (2AFC: matched the signal
    /// side; grid world: in the argmax set of the exact solution; bandit:
    /// a best-mean arm). Populated on decision steps.
    pub correct: Option<bool>,
    /// 2AFC only: the side carrying the signal this episode.
    pub signal_side: Option<Side>,
    /// Grid world only: cell occupied when the action was taken.
    pub cell: Option<usize>,
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Next observation; all zeros once the episode is terminal.
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub info: StepInfo,
}

pub trait Environment {
    fn observation_dim(&self) -> usize;
    fn action_count(&self) -> usize;

    /// Starts a new episode. The stream is a pure function of
    /// (config seed, episode seed).
    fn reset(&mut self, episode_seed: u64) -> Vec<f64>;

    /// Advances one step. Stepping a terminal episode or submitting an
    /// action outside the current action set is an error.
    fn step(&mut self, action: usize) -> Result<StepResult>;

    /// Actions valid at the current observation; `None` means all of them.
    fn allowed_actions(&self) -> Option<Vec<usize>> {
        None
    }

    fn is_terminal(&self) -> bool;
}
