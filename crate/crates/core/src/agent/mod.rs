//! The Actor (policy head), the Critic (Q and V heads), and action
//! selection.
//!
//! The three heads are fully independent networks over disjoint segments of
//! one shared [`ParamVector`]; nothing is shared below the heads. Vanilla
//! selection samples the policy once. The metacognitive path
//! ([`Agent::mac_select_action`]) instead runs an inner loop within a single
//! environment step: the Actor proposes hypothetical actions, the Critic
//! prices each one with Q(Sₙ, ·), and the agent submits the hypothetical
//! with the highest predicted value. Both paths attach a
//! [`ConfidenceRecord`]; a negative confidence `Q(Sₙ,Aₙ) − V(Sₙ)` flags the
//! submitted action as predicted-suboptimal before the environment has
//! answered.

mod policy;

pub use policy::PolicyDistribution;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::approximator::{
    ApproxKind, Approximator, HiddenState, LayoutBuilder, ParamVector, Tape,
};
use crate::error::CoreError;
use crate::rng::rng_from_seed;
use crate::Result;

/// Architecture applied to each of the three heads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "arch")]
pub enum HeadArch {
    /// Lookup tables; the Q head indexes (state, action) pairs. Requires
    /// one-hot observations.
    Tabular,
    Linear,
    Mlp { hidden: Vec<usize> },
    Recurrent { hidden: usize },
}

impl HeadArch {
    fn kind(&self) -> ApproxKind {
        match self {
            HeadArch::Tabular => ApproxKind::Tabular,
            HeadArch::Linear => ApproxKind::Linear,
            HeadArch::Mlp { hidden } => ApproxKind::Mlp {
                hidden: hidden.clone(),
            },
            HeadArch::Recurrent { hidden } => ApproxKind::Recurrent { hidden: *hidden },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub obs_dim: usize,
    pub action_count: usize,
    #[serde(flatten)]
    pub arch: HeadArch,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.obs_dim == 0 {
            violations.push("obs_dim must be positive".into());
        }
        if self.action_count < 2 {
            violations.push("need at least 2 actions".into());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CoreError::invalid_config(violations))
        }
    }

    fn q_input_dim(&self) -> usize {
        match self.arch {
            // A proper Q table is indexed by the (state, action) pair.
            HeadArch::Tabular => self.obs_dim * self.action_count,
            _ => self.obs_dim + self.action_count,
        }
    }
}

/// How the Actor conditions on already-evaluated hypotheticals when
/// proposing the next one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum AcquisitionRule {
    /// Re-sample the unconditioned policy every iteration.
    Independent,
    /// Renormalize the policy over actions not yet proposed; once all
    /// actions are covered, fall back to the unconditioned policy.
    WithoutReplacement,
    /// Add observed Critic values (scaled by 1/temperature) onto the
    /// logits of already-evaluated actions.
    ValueSoftmax { temperature: f64 },
}

impl Default for AcquisitionRule {
    fn default() -> Self {
        AcquisitionRule::WithoutReplacement
    }
}

impl AcquisitionRule {
    pub fn validate(&self) -> Result<()> {
        if let AcquisitionRule::ValueSoftmax { temperature } = self {
            if *temperature <= 0.0 {
                return Err(CoreError::invalid_config(vec![
                    "value-softmax temperature must be positive".into(),
                ]));
            }
        }
        Ok(())
    }
}

/// Inner-loop configuration. The real action is always chosen greedily over
/// the hypothetical set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MacConfig {
    /// Number of hypothetical evaluations per environment step (H ≥ 1).
    pub budget: usize,
    pub acquisition: AcquisitionRule,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            budget: 4,
            acquisition: AcquisitionRule::default(),
        }
    }
}

impl MacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(CoreError::invalid_config(vec![
                "inner-loop budget must be at least 1".into(),
            ]));
        }
        self.acquisition.validate()
    }
}

/// The growing set of hypothetical actions and their Critic evaluations
/// inside one environment step.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HypotheticalSet {
    actions: Vec<usize>,
    values: Vec<f64>,
}

impl HypotheticalSet {
    fn push(&mut self, action: usize, value: f64) {
        self.actions.push(action);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the highest-valued hypothetical; ties break toward the
    /// earliest sample.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &v) in self.values.iter().enumerate() {
            match best {
                Some(b) if self.values[b] >= v => {}
                _ => best = Some(i),
            }
        }
        best
    }

    /// Mean observed value per action, for acquisition rules that condition
    /// on the set.
    fn mean_value_by_action(&self, action_count: usize) -> Vec<Option<f64>> {
        let mut sums = vec![0.0; action_count];
        let mut counts = vec![0usize; action_count];
        for (&a, &v) in self.actions.iter().zip(&self.values) {
            sums[a] += v;
            counts[a] += 1;
        }
        (0..action_count)
            .map(|a| (counts[a] > 0).then(|| sums[a] / counts[a] as f64))
            .collect()
    }
}

/// Per-step self-evaluation: the Critic's prices for the submitted action
/// and for the state, and their difference. Built entirely from (θ, Sₙ, Aₙ)
/// before the environment responds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub state_value: f64,
    pub action_value: f64,
    /// action_value − state_value
    pub confidence: f64,
    /// confidence < 0 (strict)
    pub error_flag: bool,
    /// Filled by the harness from environment info for analysis; never set
    /// by the agent and never visible to it.
    pub ground_truth_correct: Option<bool>,
}

impl ConfidenceRecord {
    pub fn new(state_value: f64, action_value: f64) -> Self {
        let confidence = action_value - state_value;
        Self {
            state_value,
            action_value,
            confidence,
            error_flag: confidence < 0.0,
            ground_truth_correct: None,
        }
    }
}

/// Pure predicate over the record: the agent believes the submitted action
/// underperforms its state expectation.
pub fn detect_error(record: &ConfidenceRecord) -> bool {
    record.confidence < 0.0
}

/// Recorded forward tapes for one episode, kept only while training.
#[derive(Debug, Clone, Default)]
pub struct EpisodeTapes {
    pub actor: Tape,
    pub q: Tape,
    pub v: Tape,
}

/// Mutable per-episode state: hidden states for recurrent heads and
/// optional gradient tapes.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    actor_hidden: Option<HiddenState>,
    q_hidden: Option<HiddenState>,
    v_hidden: Option<HiddenState>,
    pub tapes: Option<EpisodeTapes>,
}

/// Everything selection produces for one environment step.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub action: usize,
    pub record: ConfidenceRecord,
    /// Probability of the submitted action under the base policy (after
    /// masking, before any acquisition adjustment).
    pub policy_prob: f64,
    /// The base policy itself, retained for gradient computation.
    pub distribution: PolicyDistribution,
    /// `Some` iff the inner loop ran.
    pub hypotheticals: Option<HypotheticalSet>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    cfg: AgentConfig,
    actor: Approximator,
    critic_q: Approximator,
    critic_v: Approximator,
    params: ParamVector,
}

impl Agent {
    /// Builds the three heads and initializes parameters from `seed`.
    pub fn init(cfg: AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut builder = LayoutBuilder::new();
        let actor = Approximator::new(
            "actor",
            cfg.arch.kind(),
            cfg.obs_dim,
            cfg.action_count,
            &mut builder,
        );
        let critic_q = Approximator::new("critic_q", cfg.arch.kind(), cfg.q_input_dim(), 1, &mut builder);
        let critic_v = Approximator::new("critic_v", cfg.arch.kind(), cfg.obs_dim, 1, &mut builder);
        let params = ParamVector::init_uniform(builder.finish(), &mut rng_from_seed(seed));
        Ok(Self {
            cfg,
            actor,
            critic_q,
            critic_v,
            params,
        })
    }

    /// Rebuilds an agent around restored parameters. The restored layout
    /// must match the one `cfg` implies.
    pub fn from_params(cfg: AgentConfig, params: ParamVector) -> Result<Self> {
        let mut agent = Self::init(cfg, 0)?;
        if agent.params.layout().segments() != params.layout().segments() {
            return Err(CoreError::LayoutMismatch);
        }
        agent.params = ParamVector::from_values(agent.params.layout().clone(), params.values().to_vec())?;
        Ok(agent)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn actor(&self) -> &Approximator {
        &self.actor
    }

    pub fn critic_q_head(&self) -> &Approximator {
        &self.critic_q
    }

    pub fn critic_v_head(&self) -> &Approximator {
        &self.critic_v
    }

    /// Fresh episode state; hidden states start at zero.
    pub fn begin_episode(&self, record: bool) -> EpisodeState {
        EpisodeState {
            actor_hidden: self.actor.initial_hidden(),
            q_hidden: self.critic_q.initial_hidden(),
            v_hidden: self.critic_v.initial_hidden(),
            tapes: record.then(EpisodeTapes::default),
        }
    }

    /// One-hot action appended to (or paired with) the state features.
    pub fn encode_q_input(&self, obs: &[f64], action: usize) -> Vec<f64> {
        match self.cfg.arch {
            HeadArch::Tabular => {
                let state = obs
                    .iter()
                    .position(|&v| v != 0.0)
                    .expect("tabular heads need one-hot observations");
                let mut input = vec![0.0; self.cfg.obs_dim * self.cfg.action_count];
                input[state * self.cfg.action_count + action] = 1.0;
                input
            }
            _ => {
                let mut input = Vec::with_capacity(self.cfg.obs_dim + self.cfg.action_count);
                input.extend_from_slice(obs);
                let mut one_hot = vec![0.0; self.cfg.action_count];
                one_hot[action] = 1.0;
                input.extend_from_slice(&one_hot);
                input
            }
        }
    }

    /// Policy over the (optionally masked) action set at this step.
    /// Advances the actor head's hidden state.
    pub fn actor_policy(
        &self,
        ep: &mut EpisodeState,
        obs: &[f64],
        allowed: Option<&[usize]>,
    ) -> Result<PolicyDistribution> {
        let tape = ep.tapes.as_mut().map(|t| &mut t.actor);
        let (logits, next) = match tape {
            Some(tape) => self
                .actor
                .forward_recorded(&self.params, obs, ep.actor_hidden.as_ref(), tape)?,
            None => self.actor.forward(&self.params, obs, ep.actor_hidden.as_ref())?,
        };
        ep.actor_hidden = next;
        Ok(PolicyDistribution::from_logits(&logits, allowed))
    }

    /// V(Sₙ). Advances the V head's hidden state.
    pub fn critic_v(&self, ep: &mut EpisodeState, obs: &[f64]) -> Result<f64> {
        let tape = ep.tapes.as_mut().map(|t| &mut t.v);
        let (out, next) = match tape {
            Some(tape) => self
                .critic_v
                .forward_recorded(&self.params, obs, ep.v_hidden.as_ref(), tape)?,
            None => self.critic_v.forward(&self.params, obs, ep.v_hidden.as_ref())?,
        };
        ep.v_hidden = next;
        Ok(out[0])
    }

    /// Q(Sₙ, action) without advancing the Q head; used to price
    /// hypothetical actions, none of which may ever be executed.
    pub fn critic_q_peek(&self, ep: &EpisodeState, obs: &[f64], action: usize) -> Result<f64> {
        let input = self.encode_q_input(obs, action);
        let (out, _) = self
            .critic_q
            .forward(&self.params, &input, ep.q_hidden.as_ref())?;
        Ok(out[0])
    }

    /// Q(Sₙ, action) for the action actually submitted; advances the Q
    /// head's hidden state.
    pub fn critic_q(&self, ep: &mut EpisodeState, obs: &[f64], action: usize) -> Result<f64> {
        let input = self.encode_q_input(obs, action);
        let tape = ep.tapes.as_mut().map(|t| &mut t.q);
        let (out, next) = match tape {
            Some(tape) => self
                .critic_q
                .forward_recorded(&self.params, &input, ep.q_hidden.as_ref(), tape)?,
            None => self
                .critic_q
                .forward(&self.params, &input, ep.q_hidden.as_ref())?,
        };
        ep.q_hidden = next;
        Ok(out[0])
    }

    /// Vanilla actor-critic selection: sample the policy once, then record
    /// the Critic's prices for the sampled action.
    pub fn vanilla_select_action<R: Rng>(
        &self,
        ep: &mut EpisodeState,
        obs: &[f64],
        allowed: Option<&[usize]>,
        rng: &mut R,
    ) -> Result<SelectionOutcome> {
        let distribution = self.actor_policy(ep, obs, allowed)?;
        let state_value = self.critic_v(ep, obs)?;
        let action = distribution.sample(rng);
        let action_value = self.critic_q(ep, obs, action)?;
        Ok(SelectionOutcome {
            action,
            record: ConfidenceRecord::new(state_value, action_value),
            policy_prob: distribution.prob(action),
            distribution,
            hypotheticals: None,
        })
    }

    /// Metacognitive selection. Runs the inner loop exactly `mac.budget`
    /// times — propose a hypothetical from the acquisition-adjusted policy,
    /// price it with the Q head, append the pair — then submits the
    /// highest-priced hypothetical (earliest sample wins ties). Consumes
    /// nothing beyond (θ, Sₙ, RNG): no reward, no next state.
    pub fn mac_select_action<R: Rng>(
        &self,
        ep: &mut EpisodeState,
        obs: &[f64],
        allowed: Option<&[usize]>,
        mac: &MacConfig,
        rng: &mut R,
    ) -> Result<SelectionOutcome> {
        mac.validate()?;
        let distribution = self.actor_policy(ep, obs, allowed)?;
        let state_value = self.critic_v(ep, obs)?;

        let mut set = HypotheticalSet::default();
        for _ in 0..mac.budget {
            let proposal_dist = self.acquisition_policy(&distribution, &set, allowed, &mac.acquisition);
            let hypothetical = proposal_dist.sample(rng);
            let value = self.critic_q_peek(ep, obs, hypothetical)?;
            set.push(hypothetical, value);
        }
        let best = set.best().expect("budget >= 1 guarantees a candidate");
        let action = set.actions()[best];

        // Advance the Q head with the submitted action; same hidden state
        // and parameters as the peek, so the value is identical.
        let action_value = self.critic_q(ep, obs, action)?;
        Ok(SelectionOutcome {
            action,
            record: ConfidenceRecord::new(state_value, action_value),
            policy_prob: distribution.prob(action),
            distribution,
            hypotheticals: Some(set),
        })
    }

    fn acquisition_policy(
        &self,
        base: &PolicyDistribution,
        set: &HypotheticalSet,
        allowed: Option<&[usize]>,
        rule: &AcquisitionRule,
    ) -> PolicyDistribution {
        match rule {
            AcquisitionRule::Independent => base.clone(),
            AcquisitionRule::WithoutReplacement => {
                let remaining: Vec<usize> = (0..self.cfg.action_count)
                    .filter(|a| allowed.map_or(true, |m| m.contains(a)))
                    .filter(|a| !set.actions().contains(a))
                    .collect();
                if remaining.is_empty() {
                    base.clone()
                } else {
                    PolicyDistribution::from_logits(base.logits(), Some(&remaining))
                }
            }
            AcquisitionRule::ValueSoftmax { temperature } => {
                let means = set.mean_value_by_action(self.cfg.action_count);
                let adjusted: Vec<f64> = base
                    .logits()
                    .iter()
                    .enumerate()
                    .map(|(a, &logit)| logit + means[a].map_or(0.0, |q| q / temperature))
                    .collect();
                PolicyDistribution::from_logits(&adjusted, allowed)
            }
        }
    }
}
