//! Speeded two-alternative forced choice.
//!
//! Each episode draws a signal side uniformly, then presents
//! `stimulus_steps` paired noisy observations: the signal channel samples
//! N(signal_mean, signal_std²), the other N(noise_mean, noise_std²). After
//! the stimulus concludes the channels go silent (exact zeros). The action
//! submitted at the final observation is the forced binary response;
//! actions at every earlier step are ignored, and `wait` is rejected at the
//! response step itself.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Environment, StepInfo, StepResult};
use crate::error::CoreError;
use crate::rng::{derive_seed, rng_from_seed};
use crate::Result;

pub const ACTION_LEFT: usize = 0;
pub const ACTION_RIGHT: usize = 1;
pub const ACTION_WAIT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn action(self) -> usize {
        match self {
            Side::Left => ACTION_LEFT,
            Side::Right => ACTION_RIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Stimulus,
    Response,
}

/// One paired observation as the agent sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub left: f64,
    pub right: f64,
    pub phase: Phase,
}

impl Observation {
    pub const DIM: usize = 3;

    pub fn encode(&self) -> Vec<f64> {
        let flag = match self.phase {
            Phase::Stimulus => 0.0,
            Phase::Response => 1.0,
        };
        vec![self.left, self.right, flag]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoAfcConfig {
    pub signal_mean: f64,
    pub noise_mean: f64,
    pub signal_std: f64,
    pub noise_std: f64,
    /// Number of paired noisy observations.
    pub stimulus_steps: usize,
    /// Zero-input steps between the stimulus and the forced response.
    pub post_stimulus_steps: usize,
    pub reward_correct: f64,
    pub reward_incorrect: f64,
    pub seed: u64,
}

impl Default for TwoAfcConfig {
    fn default() -> Self {
        Self {
            signal_mean: 0.5,
            noise_mean: 0.0,
            signal_std: 1.0,
            noise_std: 1.0,
            stimulus_steps: 5,
            post_stimulus_steps: 0,
            reward_correct: 1.0,
            reward_incorrect: 0.0,
            seed: 0,
        }
    }
}

impl TwoAfcConfig {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if !(self.signal_mean > self.noise_mean) {
            violations.push(format!(
                "signal_mean ({}) must exceed noise_mean ({})",
                self.signal_mean, self.noise_mean
            ));
        }
        if self.stimulus_steps < 1 {
            violations.push("stimulus_steps must be at least 1".into());
        }
        if self.signal_std < 0.0 || self.noise_std < 0.0 {
            violations.push("standard deviations must be non-negative".into());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CoreError::invalid_config(violations))
        }
    }
}

/// Per-observation and stimulus-aggregate sensitivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dprime {
    /// (μ_s − μ_n) / sqrt(0.5 (σ_s² + σ_n²))
    pub per_observation: f64,
    /// The mean of n i.i.d. observations has variance σ²/n, so sensitivity
    /// over the whole stimulus scales by √n.
    pub aggregate: f64,
}

pub fn dprime_of_config(cfg: &TwoAfcConfig) -> Result<Dprime> {
    let pooled = 0.5 * (cfg.signal_std.powi(2) + cfg.noise_std.powi(2));
    if pooled <= 0.0 {
        return Err(CoreError::Undefined(
            "d-prime is undefined when both variances are zero",
        ));
    }
    let per = (cfg.signal_mean - cfg.noise_mean) / pooled.sqrt();
    Ok(Dprime {
        per_observation: per,
        aggregate: per * (cfg.stimulus_steps as f64).sqrt(),
    })
}

#[derive(Debug, Clone)]
pub struct TwoAfc {
    cfg: TwoAfcConfig,
    rng: ChaCha8Rng,
    signal: Side,
    /// Index of the observation the agent is currently looking at.
    obs_index: usize,
    terminal: bool,
}

impl TwoAfc {
    pub fn new(cfg: TwoAfcConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            rng: rng_from_seed(cfg.seed),
            cfg,
            signal: Side::Left,
            obs_index: 0,
            terminal: true,
        })
    }

    pub fn config(&self) -> &TwoAfcConfig {
        &self.cfg
    }

    /// Ground truth for the current episode.
    pub fn signal_side(&self) -> Side {
        self.signal
    }

    /// Observation index at which the forced response is read.
    fn response_index(&self) -> usize {
        self.cfg.stimulus_steps + self.cfg.post_stimulus_steps
    }

    fn observation(&mut self) -> Observation {
        if self.obs_index < self.cfg.stimulus_steps {
            let zs: f64 = StandardNormal.sample(&mut self.rng);
            let zn: f64 = StandardNormal.sample(&mut self.rng);
            let signal_value = self.cfg.signal_mean + self.cfg.signal_std * zs;
            let noise_value = self.cfg.noise_mean + self.cfg.noise_std * zn;
            let (left, right) = match self.signal {
                Side::Left => (signal_value, noise_value),
                Side::Right => (noise_value, signal_value),
            };
            Observation {
                left,
                right,
                phase: Phase::Stimulus,
            }
        } else {
            Observation {
                left: 0.0,
                right: 0.0,
                phase: Phase::Response,
            }
        }
    }
}

impl Environment for TwoAfc {
    fn observation_dim(&self) -> usize {
        Observation::DIM
    }

    fn action_count(&self) -> usize {
        3
    }

    fn reset(&mut self, episode_seed: u64) -> Vec<f64> {
        self.rng = rng_from_seed(derive_seed(self.cfg.seed, episode_seed));
        self.signal = if self.rng.random_range(0..2) == 0 {
            Side::Left
        } else {
            Side::Right
        };
        self.obs_index = 0;
        self.terminal = false;
        self.observation().encode()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.terminal {
            return Err(CoreError::EpisodeFinished);
        }
        if action >= 3 {
            return Err(CoreError::InvalidAction {
                action,
                reason: "2AFC actions are left, right, wait".into(),
            });
        }
        let at_response = self.obs_index == self.response_index();
        if at_response {
            if action == ACTION_WAIT {
                return Err(CoreError::InvalidAction {
                    action,
                    reason: "the response step forces a left/right choice".into(),
                });
            }
            let correct = action == self.signal.action();
            self.terminal = true;
            Ok(StepResult {
                observation: vec![0.0; Observation::DIM],
                reward: if correct {
                    self.cfg.reward_correct
                } else {
                    self.cfg.reward_incorrect
                },
                terminal: true,
                info: StepInfo {
                    correct: Some(correct),
                    signal_side: Some(self.signal),
                    cell: None,
                },
            })
        } else {
            // Stimulus or waiting step: the action is ignored.
            self.obs_index += 1;
            Ok(StepResult {
                observation: self.observation().encode(),
                reward: 0.0,
                terminal: false,
                info: StepInfo {
                    correct: None,
                    signal_side: Some(self.signal),
                    cell: None,
                },
            })
        }
    }

    fn allowed_actions(&self) -> Option<Vec<usize>> {
        if !self.terminal && self.obs_index == self.response_index() {
            Some(vec![ACTION_LEFT, ACTION_RIGHT])
        } else {
            None
        }
    }

    fn is_terminal(&self) -> bool {
        self.terminal
    }
}
