//! Episode collection: drives an agent through an environment and records
//! everything training and analysis need.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::agent::{Agent, ConfidenceRecord, EpisodeTapes, MacConfig};
use crate::envs::{Environment, StepInfo};
use crate::Result;

/// Which selection path the agent uses during rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum SelectionMode {
    Vanilla,
    Mac(MacConfig),
}

/// One environment step as seen from the agent's side.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub observation: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// Base-policy probability of the submitted action.
    pub policy_prob: f64,
    /// ∂ log p(action) / ∂ logits at this step.
    pub log_prob_grad: Vec<f64>,
    pub record: ConfidenceRecord,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub steps: Vec<StepRecord>,
    pub trajectory: Trajectory,
    /// Present when the rollout was recorded for training.
    pub tapes: Option<EpisodeTapes>,
}

impl Rollout {
    pub fn total_reward(&self) -> f64 {
        self.trajectory.rewards().iter().sum()
    }
}

/// Runs one full episode. The environment stream is fixed by
/// `episode_seed`; action sampling draws from `rng`.
pub fn collect_episode<E: Environment + ?Sized, R: Rng>(
    agent: &Agent,
    env: &mut E,
    mode: &SelectionMode,
    episode_seed: u64,
    rng: &mut R,
    record: bool,
) -> Result<Rollout> {
    let mut ep = agent.begin_episode(record);
    let mut obs = env.reset(episode_seed);
    let mut steps = Vec::new();
    let mut trajectory = Trajectory::new();

    while !env.is_terminal() {
        let allowed = env.allowed_actions();
        let outcome = match mode {
            SelectionMode::Vanilla => {
                agent.vanilla_select_action(&mut ep, &obs, allowed.as_deref(), rng)?
            }
            SelectionMode::Mac(mac) => {
                agent.mac_select_action(&mut ep, &obs, allowed.as_deref(), mac, rng)?
            }
        };
        let result = env.step(outcome.action)?;
        trajectory.push(obs.clone(), outcome.action, result.reward);
        steps.push(StepRecord {
            observation: obs,
            action: outcome.action,
            reward: result.reward,
            policy_prob: outcome.policy_prob,
            log_prob_grad: outcome.distribution.log_prob_grad(outcome.action),
            record: outcome.record,
            info: result.info,
        });
        obs = result.observation;
    }
    trajectory.finish(obs);
    trajectory.validate()?;
    Ok(Rollout {
        steps,
        trajectory,
        tapes: ep.tapes,
    })
}
