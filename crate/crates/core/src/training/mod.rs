//! Training machinery: returns, the policy-gradient estimator with
//! control-variate baselines, critic regression, and the update loop.

mod baseline;
mod optimizer;
mod policy_gradient;
mod rollout;
mod train;

pub use baseline::{
    estimate_beta_star, modified_return, variance_ratio_diagnostic, BaselineEstimate,
    VarianceRatio,
};
pub use optimizer::OptimizerConfig;
pub use policy_gradient::{policy_gradient_estimate, EstimatorKind, GradientEstimate};
pub use rollout::{collect_episode, Rollout, SelectionMode, StepRecord};
pub use train::{
    critic_loss_and_gradient, train, BaselineMode, TrainConfig, TrainOutcome, UpdateMetrics,
};

use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::Result;

/// Ordered record of one episode: states S₁…S_N (encoded observations),
/// the actions taken, and the rewards received.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    states: Vec<Vec<f64>>,
    actions: Vec<usize>,
    rewards: Vec<f64>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one transition taken from `state`.
    pub fn push(&mut self, state: Vec<f64>, action: usize, reward: f64) {
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
    }

    /// Closes the episode with the final state S_N.
    pub fn finish(&mut self, final_state: Vec<f64>) {
        self.states.push(final_state);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// |actions| = |rewards| = |states| − 1
    pub fn validate(&self) -> Result<()> {
        if self.states.len() == self.actions.len() + 1 && self.actions.len() == self.rewards.len()
        {
            Ok(())
        } else {
            Err(CoreError::invalid_config(vec![format!(
                "malformed trajectory: {} states, {} actions, {} rewards",
                self.states.len(),
                self.actions.len(),
                self.rewards.len()
            )]))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMode {
    /// Plain sum of rewards.
    UndiscountedSum,
    /// γ-discounted sum.
    Discounted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReturnConfig {
    pub gamma: f64,
    pub mode: ReturnMode,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        // γ = 1 is fine here: every shipped environment is finite-horizon.
        Self {
            gamma: 1.0,
            mode: ReturnMode::Discounted,
        }
    }
}

impl ReturnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma > 0.0 && self.gamma <= 1.0 {
            Ok(())
        } else {
            Err(CoreError::invalid_config(vec![format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )]))
        }
    }

    fn effective_gamma(&self) -> f64 {
        match self.mode {
            ReturnMode::UndiscountedSum => 1.0,
            ReturnMode::Discounted => self.gamma,
        }
    }
}

/// G(τ) = Σₙ γⁿ⁻¹ Rₙ (plain sum when undiscounted).
pub fn compute_return(traj: &Trajectory, cfg: &ReturnConfig) -> f64 {
    let gamma = cfg.effective_gamma();
    let mut total = 0.0;
    let mut scale = 1.0;
    for &r in traj.rewards() {
        total += scale * r;
        scale *= gamma;
    }
    total
}

/// Per-step suffix returns: element n is Σ_{m≥n} γ^{m−n} R_m. Element 0
/// equals [`compute_return`]. These are the critic's regression targets.
pub fn compute_returns_to_go(traj: &Trajectory, cfg: &ReturnConfig) -> Vec<f64> {
    let gamma = cfg.effective_gamma();
    let mut out = vec![0.0; traj.rewards().len()];
    let mut acc = 0.0;
    for (n, &r) in traj.rewards().iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[n] = acc;
    }
    out
}
