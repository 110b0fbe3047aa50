//! Batch policy-gradient estimation.

use crate::error::CoreError;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Weighted by raw returns G(τ).
    Plain,
    /// Weighted by control-variate-modified returns G̃(τ).
    ControlVariate,
}

#[derive(Debug, Clone)]
pub struct GradientEstimate {
    /// Parameter-vector-shaped gradient of the expected return.
    pub gradient: Vec<f64>,
    pub batch_size: usize,
    pub estimator: EstimatorKind,
}

/// Mean over the batch of weight(τ) · Σₙ ∇θ log p(Aₙ|Sₙ;θ).
///
/// `log_prob_grads[i]` is trajectory i's summed per-step log-probability
/// gradient; `weights[i]` is its return (or modified return, or 1.0 when
/// the per-step weighting was already folded into the sum). Non-finite
/// inputs reject the whole batch.
pub fn policy_gradient_estimate(
    log_prob_grads: &[Vec<f64>],
    weights: &[f64],
    estimator: EstimatorKind,
) -> Result<GradientEstimate> {
    if log_prob_grads.is_empty() {
        return Err(CoreError::NotEnoughSamples { needed: 1, got: 0 });
    }
    if log_prob_grads.len() != weights.len() {
        return Err(CoreError::DimensionMismatch {
            context: "policy gradient batch",
            expected: log_prob_grads.len(),
            actual: weights.len(),
        });
    }
    let dim = log_prob_grads[0].len();
    let mut gradient = vec![0.0; dim];
    for (grad, &w) in log_prob_grads.iter().zip(weights) {
        if grad.len() != dim {
            return Err(CoreError::DimensionMismatch {
                context: "policy gradient width",
                expected: dim,
                actual: grad.len(),
            });
        }
        if !w.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(CoreError::NonFiniteGradient);
        }
        for (acc, g) in gradient.iter_mut().zip(grad) {
            *acc += w * g;
        }
    }
    let scale = 1.0 / log_prob_grads.len() as f64;
    for g in &mut gradient {
        *g *= scale;
    }
    Ok(GradientEstimate {
        gradient,
        batch_size: log_prob_grads.len(),
        estimator,
    })
}
