//! The update loop: collect a batch of episodes, step the Actor along the
//! policy gradient (with the configured baseline), regress both Critic
//! heads on returns-to-go.

use serde::{Deserialize, Serialize};

use super::baseline::{estimate_beta_star, modified_return, variance_ratio_diagnostic};
use super::optimizer::{apply_step, OptimizerConfig};
use super::policy_gradient::{policy_gradient_estimate, EstimatorKind, GradientEstimate};
use super::rollout::{collect_episode, Rollout, SelectionMode};
use super::{compute_return, compute_returns_to_go, ReturnConfig};
use crate::agent::Agent;
use crate::approximator::{Approximator, ParamVector, Tape};
use crate::envs::Environment;
use crate::error::CoreError;
use crate::rng::{derive_seed, rng_from_seed};
use crate::Result;

/// Baseline applied to the policy-gradient weights.
///
/// The trajectory-level modes apply the modified-return form
/// G̃ = G − β(Q(τ) − E[Q(τ)]) with Q(τ) = V(S₁;θ), the critic's
/// pre-action prediction of the episode return. A control variate in the
/// gradient estimator must not depend on the sampled actions, or the
/// substitution changes the estimator's expectation by β·∇E[Q]; the
/// action-dependent pairs (G, Q(S₁,A₁)) are still logged as diagnostics,
/// just never used as weights. `PerStepAdvantage` is the practical
/// per-step variant (return-to-go minus V(Sₙ)).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Raw returns.
    None,
    /// Subtract the batch-mean return.
    MeanBaseline,
    /// Refit β̂* = Cov[G,V(S₁)]/V[V(S₁)] on every batch; environments with
    /// a fixed start observation make V(S₁) constant, in which case this
    /// falls back to the batch-mean baseline.
    FittedBeta,
    /// Fixed β = 1 against V(S₁): classic advantage-style weighting.
    UnitBeta,
    /// Weight each step's log-probability gradient by Gₙ^togo − V(Sₙ).
    PerStepAdvantage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    pub returns: ReturnConfig,
    pub baseline: BaselineMode,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.returns.validate()
    }
}

/// One JSONL-able metrics record per update. Wall-clock timing is kept out
/// of this record so that identical configs reproduce identical streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub update: usize,
    pub mean_return: f64,
    pub var_ratio_empirical: Option<f64>,
    pub var_ratio_predicted: Option<f64>,
    pub beta: Option<f64>,
    pub actor_loss: f64,
    pub critic_q_loss: f64,
    pub critic_v_loss: f64,
    /// Cumulative environment steps after this update.
    pub env_steps: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutcome {
    pub metrics: Vec<UpdateMetrics>,
    pub env_steps: usize,
}

/// Mean-squared-error loss and its parameter gradient for one critic head
/// over a batch of recorded episodes. `predictions[i][n]` is the head's
/// recorded output at step n of episode i; `targets` aligns with it.
pub fn critic_loss_and_gradient(
    head: &Approximator,
    params: &ParamVector,
    tapes: &[&Tape],
    predictions: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> Result<(f64, GradientEstimate)> {
    if tapes.len() != predictions.len() || tapes.len() != targets.len() {
        return Err(CoreError::DimensionMismatch {
            context: "critic regression batch",
            expected: tapes.len(),
            actual: predictions.len().min(targets.len()),
        });
    }
    let total_steps: usize = predictions.iter().map(Vec::len).sum();
    if total_steps == 0 {
        return Err(CoreError::NotEnoughSamples { needed: 1, got: 0 });
    }
    let scale = 1.0 / total_steps as f64;
    let mut loss = 0.0;
    let mut gradient = vec![0.0; params.len()];
    for ((tape, preds), tgts) in tapes.iter().zip(predictions).zip(targets) {
        let step_grads: Vec<Vec<f64>> = preds
            .iter()
            .zip(tgts)
            .map(|(p, t)| {
                let err = p - t;
                loss += err * err * scale;
                vec![2.0 * err * scale]
            })
            .collect();
        let g = head.backward(params, tape, &step_grads)?;
        for (acc, gv) in gradient.iter_mut().zip(&g) {
            *acc += gv;
        }
    }
    Ok((
        loss,
        GradientEstimate {
            gradient,
            batch_size: tapes.len(),
            estimator: EstimatorKind::Plain,
        },
    ))
}

struct BatchStats {
    per_traj_grads: Vec<Vec<f64>>,
    weights: Vec<f64>,
    kind: EstimatorKind,
    beta: Option<f64>,
    actor_loss: f64,
}

fn actor_batch(
    agent: &Agent,
    rollouts: &[Rollout],
    returns: &[f64],
    togo: &[Vec<f64>],
    baseline: BaselineMode,
) -> Result<BatchStats> {
    let params = agent.params();
    let batch = rollouts.len() as f64;

    // Action-independent trajectory-level control variate: the critic's
    // price of the opening state, its estimate of E[G | S₁].
    let v_start: Vec<f64> = rollouts
        .iter()
        .map(|r| r.steps[0].record.state_value)
        .collect();
    let mean_v = v_start.iter().sum::<f64>() / batch;
    let mean_g = returns.iter().sum::<f64>() / batch;

    let mut beta = None;
    let mut kind = EstimatorKind::ControlVariate;
    let weights: Vec<f64> = match baseline {
        BaselineMode::None => {
            kind = EstimatorKind::Plain;
            returns.to_vec()
        }
        BaselineMode::MeanBaseline => returns.iter().map(|g| g - mean_g).collect(),
        BaselineMode::FittedBeta => match estimate_beta_star(returns, &v_start) {
            Ok(est) => {
                beta = Some(est.beta);
                returns
                    .iter()
                    .zip(&v_start)
                    .map(|(&g, &v)| modified_return(g, v, mean_v, est.beta))
                    .collect()
            }
            // V(S₁) has no spread (fixed start observation, or a critic
            // that has not differentiated yet): use the batch mean instead
            // of aborting the run.
            Err(_) => returns.iter().map(|g| g - mean_g).collect(),
        },
        BaselineMode::UnitBeta => {
            beta = Some(1.0);
            returns
                .iter()
                .zip(&v_start)
                .map(|(&g, &v)| modified_return(g, v, mean_v, 1.0))
                .collect()
        }
        BaselineMode::PerStepAdvantage => vec![1.0; rollouts.len()],
    };

    let mut per_traj_grads = Vec::with_capacity(rollouts.len());
    let mut actor_loss = 0.0;
    for (i, rollout) in rollouts.iter().enumerate() {
        let tapes = rollout
            .tapes
            .as_ref()
            .expect("training rollouts are recorded");
        let step_grads: Vec<Vec<f64>> = rollout
            .steps
            .iter()
            .enumerate()
            .map(|(n, step)| {
                let coeff = match baseline {
                    BaselineMode::PerStepAdvantage => togo[i][n] - step.record.state_value,
                    _ => 1.0,
                };
                actor_loss -= match baseline {
                    BaselineMode::PerStepAdvantage => coeff * step.policy_prob.ln(),
                    _ => weights[i] * step.policy_prob.ln(),
                } / batch;
                step.log_prob_grad.iter().map(|g| coeff * g).collect()
            })
            .collect();
        per_traj_grads.push(agent.actor().backward(params, &tapes.actor, &step_grads)?);
    }
    Ok(BatchStats {
        per_traj_grads,
        weights,
        kind,
        beta,
        actor_loss,
    })
}

/// Alternates batch collection with Actor and Critic updates until
/// `total_updates` batches have been consumed. Deterministic given the
/// seeds in the configs. Non-finite losses abort with a diagnostic.
pub fn train<E: Environment + ?Sized>(
    agent: &mut Agent,
    env: &mut E,
    mode: &SelectionMode,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let opt = &cfg.optimizer;
    let mut sample_rng = rng_from_seed(derive_seed(opt.seed, 0x5a4d));
    let mut outcome = TrainOutcome::default();
    let mut episode_counter = 0u64;

    let actor_ids = agent.actor().segment_ids();
    let q_ids = agent.critic_q_head().segment_ids();
    let v_ids = agent.critic_v_head().segment_ids();

    for update in 0..opt.total_updates {
        let mut rollouts = Vec::with_capacity(opt.batch_size);
        for _ in 0..opt.batch_size {
            let rollout = collect_episode(agent, env, mode, episode_counter, &mut sample_rng, true)?;
            episode_counter += 1;
            outcome.env_steps += rollout.trajectory.len();
            rollouts.push(rollout);
        }

        let returns: Vec<f64> = rollouts
            .iter()
            .map(|r| compute_return(&r.trajectory, &cfg.returns))
            .collect();
        let togo: Vec<Vec<f64>> = rollouts
            .iter()
            .map(|r| compute_returns_to_go(&r.trajectory, &cfg.returns))
            .collect();
        let mean_return = returns.iter().sum::<f64>() / returns.len() as f64;

        let stats = actor_batch(agent, &rollouts, &returns, &togo, cfg.baseline)?;
        let actor_grad = policy_gradient_estimate(&stats.per_traj_grads, &stats.weights, stats.kind)?;

        let q_tapes: Vec<&Tape> = rollouts
            .iter()
            .map(|r| &r.tapes.as_ref().unwrap().q)
            .collect();
        let v_tapes: Vec<&Tape> = rollouts
            .iter()
            .map(|r| &r.tapes.as_ref().unwrap().v)
            .collect();
        let q_preds: Vec<Vec<f64>> = rollouts
            .iter()
            .map(|r| r.steps.iter().map(|s| s.record.action_value).collect())
            .collect();
        let v_preds: Vec<Vec<f64>> = rollouts
            .iter()
            .map(|r| r.steps.iter().map(|s| s.record.state_value).collect())
            .collect();
        let (q_loss, q_grad) =
            critic_loss_and_gradient(agent.critic_q_head(), agent.params(), &q_tapes, &q_preds, &togo)?;
        let (v_loss, v_grad) =
            critic_loss_and_gradient(agent.critic_v_head(), agent.params(), &v_tapes, &v_preds, &togo)?;

        for (what, value) in [
            ("actor loss", stats.actor_loss),
            ("critic Q loss", q_loss),
            ("critic V loss", v_loss),
            ("mean return", mean_return),
        ] {
            if !value.is_finite() {
                return Err(CoreError::Diverged { update, what });
            }
        }

        // Variance diagnostic over this batch's (G, Q(τ)) pairs, logged for
        // every baseline mode.
        let q_traj: Vec<f64> = rollouts
            .iter()
            .map(|r| r.steps[0].record.action_value)
            .collect();
        let diag = variance_ratio_diagnostic(&returns, &q_traj).ok();

        let params = agent.params_mut();
        apply_step(params, &actor_ids, &actor_grad.gradient, opt.actor_lr, opt.grad_clip);
        apply_step(params, &q_ids, &q_grad.gradient, -opt.critic_q_lr, opt.grad_clip);
        apply_step(params, &v_ids, &v_grad.gradient, -opt.critic_v_lr, opt.grad_clip);

        outcome.metrics.push(UpdateMetrics {
            update,
            mean_return,
            var_ratio_empirical: diag.map(|d| d.empirical),
            var_ratio_predicted: diag.map(|d| d.predicted),
            beta: stats.beta,
            actor_loss: stats.actor_loss,
            critic_q_loss: q_loss,
            critic_v_loss: v_loss,
            env_steps: outcome.env_steps,
        });
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{AgentConfig, HeadArch};
    use crate::envs::{Bandit, BanditConfig};

    fn bandit_agent(seed: u64) -> Agent {
        Agent::init(
            AgentConfig {
                obs_dim: 1,
                action_count: 2,
                arch: HeadArch::Tabular,
            },
            seed,
        )
        .unwrap()
    }

    fn quick_cfg(updates: usize, baseline: BaselineMode) -> TrainConfig {
        TrainConfig {
            optimizer: OptimizerConfig {
                actor_lr: 0.05,
                critic_q_lr: 0.1,
                critic_v_lr: 0.1,
                batch_size: 8,
                total_updates: updates,
                grad_clip: Some(5.0),
                seed: 12,
            },
            returns: ReturnConfig::default(),
            baseline,
        }
    }

    #[test]
    fn zero_updates_yield_an_empty_stream() {
        let mut agent = bandit_agent(0);
        let mut env = Bandit::new(BanditConfig::default()).unwrap();
        let out = train(&mut agent, &mut env, &SelectionMode::Vanilla, &quick_cfg(0, BaselineMode::None)).unwrap();
        assert!(out.metrics.is_empty());
        assert_eq!(out.env_steps, 0);
    }

    #[test]
    fn zero_learning_rates_leave_parameters_bit_identical() {
        let mut agent = bandit_agent(1);
        let before: Vec<u64> = agent.params().values().iter().map(|v| v.to_bits()).collect();
        let mut env = Bandit::new(BanditConfig::default()).unwrap();
        let mut cfg = quick_cfg(5, BaselineMode::FittedBeta);
        cfg.optimizer.actor_lr = 0.0;
        cfg.optimizer.critic_q_lr = 0.0;
        cfg.optimizer.critic_v_lr = 0.0;
        train(&mut agent, &mut env, &SelectionMode::Vanilla, &cfg).unwrap();
        let after: Vec<u64> = agent.params().values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn bandit_policy_concentrates_on_the_better_arm() {
        let mut agent = bandit_agent(2);
        let mut env = Bandit::new(BanditConfig {
            means: vec![1.0, 0.0],
            stds: vec![0.5, 0.5],
            seed: 3,
        })
        .unwrap();
        train(&mut agent, &mut env, &SelectionMode::Vanilla, &quick_cfg(400, BaselineMode::None)).unwrap();
        let mut ep = agent.begin_episode(false);
        let dist = agent.actor_policy(&mut ep, &[1.0], None).unwrap();
        assert!(dist.prob(0) > 0.8, "p(best arm) = {}", dist.prob(0));
    }

    #[test]
    fn all_baseline_modes_run_and_are_reproducible() {
        for baseline in [
            BaselineMode::None,
            BaselineMode::MeanBaseline,
            BaselineMode::FittedBeta,
            BaselineMode::UnitBeta,
            BaselineMode::PerStepAdvantage,
        ] {
            let run = || {
                let mut agent = bandit_agent(4);
                let mut env = Bandit::new(BanditConfig::default()).unwrap();
                let out = train(&mut agent, &mut env, &SelectionMode::Vanilla, &quick_cfg(10, baseline)).unwrap();
                (out.metrics, agent.params().values().to_vec())
            };
            let (m1, p1) = run();
            let (m2, p2) = run();
            assert_eq!(m1, m2, "{baseline:?} metrics must reproduce");
            assert_eq!(p1, p2, "{baseline:?} params must reproduce");
            assert_eq!(m1.len(), 10);
        }
    }

    #[test]
    fn fitted_beta_is_reported_when_the_start_value_varies() {
        // The 2AFC start observation is random, so V(S₁) has spread and a
        // β̂ actually gets fit.
        use crate::envs::{TwoAfc, TwoAfcConfig};
        let mut agent = Agent::init(
            AgentConfig {
                obs_dim: 3,
                action_count: 3,
                arch: HeadArch::Linear,
            },
            5,
        )
        .unwrap();
        let mut env = TwoAfc::new(TwoAfcConfig::default()).unwrap();
        let out = train(
            &mut agent,
            &mut env,
            &SelectionMode::Vanilla,
            &quick_cfg(5, BaselineMode::FittedBeta),
        )
        .unwrap();
        assert!(out.metrics.iter().any(|m| m.beta.is_some()));
    }

    #[test]
    fn fitted_beta_on_a_fixed_start_falls_back_to_the_mean_baseline() {
        // Fixed start observation: V(S₁) is constant, β̂ degenerate.
        let mut agent = bandit_agent(5);
        let mut env = Bandit::new(BanditConfig::default()).unwrap();
        let out = train(
            &mut agent,
            &mut env,
            &SelectionMode::Vanilla,
            &quick_cfg(10, BaselineMode::FittedBeta),
        )
        .unwrap();
        assert!(out.metrics.iter().all(|m| m.beta.is_none()));
    }

    #[test]
    fn nan_parameters_abort_with_a_diagnostic() {
        let mut agent = bandit_agent(6);
        agent.params_mut().values_mut()[0] = f64::NAN;
        let mut env = Bandit::new(BanditConfig::default()).unwrap();
        let err = train(&mut agent, &mut env, &SelectionMode::Vanilla, &quick_cfg(1, BaselineMode::None))
            .unwrap_err();
        assert!(
            matches!(err, CoreError::Diverged { .. } | CoreError::NonFiniteGradient),
            "got {err:?}"
        );
    }
}
