//! Plain stochastic gradient steps with optional per-head norm clipping.

use serde::{Deserialize, Serialize};

use crate::approximator::{ParamVector, SegmentId};
use crate::error::CoreError;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub actor_lr: f64,
    pub critic_q_lr: f64,
    pub critic_v_lr: f64,
    /// Trajectories per update.
    pub batch_size: usize,
    pub total_updates: usize,
    /// Per-head global-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            actor_lr: 3e-3,
            critic_q_lr: 1e-2,
            critic_v_lr: 1e-2,
            batch_size: 16,
            total_updates: 1000,
            grad_clip: Some(5.0),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        for (name, lr) in [
            ("actor_lr", self.actor_lr),
            ("critic_q_lr", self.critic_q_lr),
            ("critic_v_lr", self.critic_v_lr),
        ] {
            if lr < 0.0 || !lr.is_finite() {
                violations.push(format!("{name} must be non-negative, got {lr}"));
            }
        }
        if self.batch_size == 0 {
            violations.push("batch_size must be positive".into());
        }
        if let Some(clip) = self.grad_clip {
            if clip <= 0.0 {
                violations.push(format!("grad_clip must be positive, got {clip}"));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CoreError::invalid_config(violations))
        }
    }
}

/// Takes one gradient step over `ids`: params += step_scale · clip(grad).
/// Pass a negative `step_scale` to descend. A zero scale leaves the
/// parameters bit-identical.
pub fn apply_step(
    params: &mut ParamVector,
    ids: &[SegmentId],
    grad: &[f64],
    step_scale: f64,
    clip: Option<f64>,
) {
    if step_scale == 0.0 {
        return;
    }
    let mut scale = step_scale;
    if let Some(max_norm) = clip {
        let norm = head_norm(params, ids, grad);
        if norm > max_norm {
            scale *= max_norm / norm;
        }
    }
    params.add_scaled(ids, grad, scale);
}

fn head_norm(params: &ParamVector, ids: &[SegmentId], grad: &[f64]) -> f64 {
    let mut sq = 0.0;
    for id in ids {
        for i in params.layout().segment(*id).range() {
            sq += grad[i] * grad[i];
        }
    }
    sq.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximator::LayoutBuilder;

    fn params() -> ParamVector {
        let mut b = LayoutBuilder::new();
        b.segment("h", "w", 3, 1);
        ParamVector::zeros(b.finish())
    }

    #[test]
    fn plain_ascent_step() {
        let mut p = params();
        let ids = p.layout().head_segments("h");
        apply_step(&mut p, &ids, &[1.0, -2.0, 0.0], 0.1, None);
        assert_eq!(p.values(), &[0.1, -0.2, 0.0]);
    }

    #[test]
    fn clipping_rescales_to_the_max_norm() {
        let mut p = params();
        let ids = p.layout().head_segments("h");
        // Norm 5, clip 1 -> effective gradient /5.
        apply_step(&mut p, &ids, &[3.0, 4.0, 0.0], 1.0, Some(1.0));
        assert!((p.values()[0] - 0.6).abs() < 1e-12);
        assert!((p.values()[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn below_threshold_gradients_are_untouched() {
        let mut p = params();
        let ids = p.layout().head_segments("h");
        apply_step(&mut p, &ids, &[0.3, 0.4, 0.0], 1.0, Some(1.0));
        assert!((p.values()[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_scale_means_bitwise_no_op() {
        let mut p = params();
        p.values_mut()[0] = -0.0;
        let before: Vec<u64> = p.values().iter().map(|v| v.to_bits()).collect();
        let ids = p.layout().head_segments("h");
        apply_step(&mut p, &ids, &[1.0, 1.0, 1.0], 0.0, Some(1.0));
        let after: Vec<u64> = p.values().iter().map(|v| v.to_bits()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig {
            actor_lr: -1.0,
            ..OptimizerConfig::default()
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig {
            batch_size: 0,
            ..OptimizerConfig::default()
        }
        .validate()
        .is_err());
    }
}
