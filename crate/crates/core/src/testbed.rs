//! Small enumerable fixtures shared by the integration and acceptance
//! suites (behind the `testbed` feature): a two-stage decision problem
//! whose exact policy gradient can be computed by enumerating all four
//! trajectories.

use crate::envs::{Environment, StepInfo, StepResult};
use crate::error::CoreError;
use crate::Result;

/// Three decision states, two actions. From the start state, action a
/// moves to state 1+a and pays `first_rewards[a]`; from either middle
/// state the episode ends with `second_rewards[state-1][action]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageMdp {
    pub first_rewards: [f64; 2],
    pub second_rewards: [[f64; 2]; 2],
}

impl Default for TwoStageMdp {
    fn default() -> Self {
        // Chosen so every softmax-gradient coordinate is comfortably away
        // from zero under near-uniform policies.
        Self {
            first_rewards: [1.0, 0.0],
            second_rewards: [[2.0, 0.0], [0.0, 0.5]],
        }
    }
}

pub const TWO_STAGE_STATES: usize = 3;
pub const TWO_STAGE_ACTIONS: usize = 2;

#[derive(Debug, Clone)]
pub struct TwoStageMdpEnv {
    mdp: TwoStageMdp,
    state: usize,
    terminal: bool,
}

impl TwoStageMdpEnv {
    pub fn new(mdp: TwoStageMdp) -> Self {
        Self {
            mdp,
            state: 0,
            terminal: true,
        }
    }

    fn encode(state: usize) -> Vec<f64> {
        let mut obs = vec![0.0; TWO_STAGE_STATES];
        obs[state] = 1.0;
        obs
    }
}

impl Environment for TwoStageMdpEnv {
    fn observation_dim(&self) -> usize {
        TWO_STAGE_STATES
    }

    fn action_count(&self) -> usize {
        TWO_STAGE_ACTIONS
    }

    fn reset(&mut self, _episode_seed: u64) -> Vec<f64> {
        self.state = 0;
        self.terminal = false;
        Self::encode(0)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.terminal {
            return Err(CoreError::EpisodeFinished);
        }
        if action >= TWO_STAGE_ACTIONS {
            return Err(CoreError::InvalidAction {
                action,
                reason: "two-stage MDP has 2 actions".into(),
            });
        }
        if self.state == 0 {
            self.state = 1 + action;
            Ok(StepResult {
                observation: Self::encode(self.state),
                reward: self.mdp.first_rewards[action],
                terminal: false,
                info: StepInfo::default(),
            })
        } else {
            let reward = self.mdp.second_rewards[self.state - 1][action];
            self.terminal = true;
            Ok(StepResult {
                observation: vec![0.0; TWO_STAGE_STATES],
                reward,
                terminal: true,
                info: StepInfo::default(),
            })
        }
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }
}

/// Softmax policy implied by a tabular actor segment laid out row-major as
/// `table[action * TWO_STAGE_STATES + state]`.
fn policy(table: &[f64], state: usize) -> [f64; TWO_STAGE_ACTIONS] {
    let logits = [table[state], table[TWO_STAGE_STATES + state]];
    let max = logits[0].max(logits[1]);
    let exps = [(logits[0] - max).exp(), (logits[1] - max).exp()];
    let z = exps[0] + exps[1];
    [exps[0] / z, exps[1] / z]
}

/// Exact ∇θ E[G(τ)] by enumerating all four trajectories, kept deliberately
/// independent of the library's backward passes: the softmax gradient is
/// applied in closed form (δ − p).
pub fn exact_policy_gradient(mdp: &TwoStageMdp, actor_table: &[f64], gamma: f64) -> Vec<f64> {
    assert_eq!(actor_table.len(), TWO_STAGE_ACTIONS * TWO_STAGE_STATES);
    let mut grad = vec![0.0; actor_table.len()];
    let p0 = policy(actor_table, 0);
    for a1 in 0..TWO_STAGE_ACTIONS {
        let mid = 1 + a1;
        let pmid = policy(actor_table, mid);
        for a2 in 0..TWO_STAGE_ACTIONS {
            let prob = p0[a1] * pmid[a2];
            let g = mdp.first_rewards[a1] + gamma * mdp.second_rewards[a1][a2];
            for b in 0..TWO_STAGE_ACTIONS {
                let indicator = |taken: usize| if b == taken { 1.0 } else { 0.0 };
                grad[b * TWO_STAGE_STATES] += prob * g * (indicator(a1) - p0[b]);
                grad[b * TWO_STAGE_STATES + mid] += prob * g * (indicator(a2) - pmid[b]);
            }
        }
    }
    grad
}

/// Exact E[G(τ)] under the same policy, for sanity checks.
pub fn exact_expected_return(mdp: &TwoStageMdp, actor_table: &[f64], gamma: f64) -> f64 {
    let p0 = policy(actor_table, 0);
    let mut total = 0.0;
    for a1 in 0..TWO_STAGE_ACTIONS {
        let pmid = policy(actor_table, 1 + a1);
        for a2 in 0..TWO_STAGE_ACTIONS {
            total += p0[a1] * pmid[a2] * (mdp.first_rewards[a1] + gamma * mdp.second_rewards[a1][a2]);
        }
    }
    total
}
