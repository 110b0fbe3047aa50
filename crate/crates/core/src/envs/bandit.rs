//! Gaussian multi-armed bandit: a single-step episodic environment used as
//! a controlled testbed for estimator and baseline properties.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Environment, StepInfo, StepResult};
use crate::error::CoreError;
use crate::rng::{derive_seed, rng_from_seed};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanditConfig {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub seed: u64,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            means: vec![1.0, 0.0],
            stds: vec![1.0, 1.0],
            seed: 0,
        }
    }
}

impl BanditConfig {
    pub fn arms(&self) -> usize {
        self.means.len()
    }

    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.means.len() < 2 {
            violations.push("a bandit needs at least 2 arms".into());
        }
        if self.stds.len() != self.means.len() {
            violations.push(format!(
                "got {} stds for {} means",
                self.stds.len(),
                self.means.len()
            ));
        }
        if self.stds.iter().any(|&s| s < 0.0) {
            violations.push("arm standard deviations must be non-negative".into());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CoreError::invalid_config(violations))
        }
    }

    /// Arms whose mean ties the best, within 1e-9.
    pub fn best_arms(&self) -> Vec<usize> {
        let best = self.means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (0..self.means.len())
            .filter(|&k| self.means[k] >= best - 1e-9)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Bandit {
    cfg: BanditConfig,
    rng: ChaCha8Rng,
    terminal: bool,
}

impl Bandit {
    pub fn new(cfg: BanditConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rng: rng_from_seed(cfg.seed),
            cfg,
            terminal: true,
        })
    }

    pub fn config(&self) -> &BanditConfig {
        &self.cfg
    }
}

impl Environment for Bandit {
    fn observation_dim(&self) -> usize {
        1
    }

    fn action_count(&self) -> usize {
        self.cfg.arms()
    }

    fn reset(&mut self, episode_seed: u64) -> Vec<f64> {
        self.rng = rng_from_seed(derive_seed(self.cfg.seed, episode_seed));
        self.terminal = false;
        vec![1.0]
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.terminal {
            return Err(CoreError::EpisodeFinished);
        }
        if action >= self.cfg.arms() {
            return Err(CoreError::InvalidAction {
                action,
                reason: format!("bandit has {} arms", self.cfg.arms()),
            });
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let reward = self.cfg.means[action] + self.cfg.stds[action] * z;
        self.terminal = true;
        Ok(StepResult {
            observation: vec![0.0],
            reward,
            terminal: true,
            info: StepInfo {
                correct: Some(self.cfg.best_arms().contains(&action)),
                signal_side: None,
                cell: None,
            },
        })
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_arm_pays_its_mean_exactly() {
        let mut env = Bandit::new(BanditConfig {
            means: vec![5.0, 0.0],
            stds: vec![0.0, 1.0],
            seed: 1,
        })
        .unwrap();
        env.reset(0);
        let r = env.step(0).unwrap();
        assert_eq!(r.reward, 5.0);
        assert!(r.terminal);
        assert_eq!(r.info.correct, Some(true));
    }

    #[test]
    fn one_step_per_episode() {
        let mut env = Bandit::new(BanditConfig::default()).unwrap();
        env.reset(0);
        env.step(1).unwrap();
        assert!(matches!(env.step(0), Err(CoreError::EpisodeFinished)));
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(BanditConfig {
            means: vec![1.0],
            stds: vec![1.0],
            seed: 0,
        }
        .validate()
        .is_err());
        assert!(BanditConfig {
            means: vec![1.0, 2.0],
            stds: vec![1.0, -0.1],
            seed: 0,
        }
        .validate()
        .is_err());
    }
}
