//! Softmax policy over a discrete (optionally masked) action set.

use rand::Rng;

/// A categorical distribution derived from policy-head logits. Masked-out
/// actions carry exactly zero probability; the rest sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDistribution {
    logits: Vec<f64>,
    probs: Vec<f64>,
    allowed: Option<Vec<usize>>,
}

impl PolicyDistribution {
    /// Softmax over `allowed` (all actions when `None`), computed with the
    /// usual max-subtraction so saturated logits stay finite.
    pub fn from_logits(logits: &[f64], allowed: Option<&[usize]>) -> Self {
        let in_mask = |a: usize| allowed.map_or(true, |m| m.contains(&a));
        let max = logits
            .iter()
            .enumerate()
            .filter(|(a, _)| in_mask(*a))
            .map(|(_, &l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut probs = vec![0.0; logits.len()];
        let mut total = 0.0;
        for (a, &logit) in logits.iter().enumerate() {
            if in_mask(a) {
                let e = (logit - max).exp();
                probs[a] = e;
                total += e;
            }
        }
        for p in &mut probs {
            *p /= total;
        }
        Self {
            logits: logits.to_vec(),
            probs,
            allowed: allowed.map(<[usize]>::to_vec),
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn allowed(&self) -> Option<&[usize]> {
        self.allowed.as_deref()
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.probs[action].ln()
    }

    /// Inverse-CDF sample.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let r: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = a;
                acc += p;
                if r < acc {
                    return a;
                }
            }
        }
        // Rounding can leave acc marginally below 1; the final candidate wins.
        last_positive
    }

    /// ∂ log p(action) / ∂ logits: e_action − p over the masked support,
    /// zero elsewhere. NaN probabilities pass through so that divergence
    /// surfaces as a rejected batch rather than a panic here.
    pub fn log_prob_grad(&self, action: usize) -> Vec<f64> {
        debug_assert!(!(self.probs[action] <= 0.0), "gradient of a masked action");
        let mut grad: Vec<f64> = self.probs.iter().map(|&p| -p).collect();
        grad[action] += 1.0;
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn equal_logits_give_the_uniform_distribution() {
        let dist = PolicyDistribution::from_logits(&[0.3, 0.3, 0.3, 0.3], None);
        for &p in dist.probs() {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_logit_takes_all_the_mass() {
        let dist = PolicyDistribution::from_logits(&[1000.0, 0.0, 0.0], None);
        assert!(dist.prob(0) > 1.0 - 1e-12);
        let mut rng = rng_from_seed(0);
        for _ in 0..100 {
            assert_eq!(dist.sample(&mut rng), 0);
        }
    }

    #[test]
    fn two_action_softmax_arithmetic() {
        // logits (ln 3, 0) -> probabilities (0.75, 0.25)
        let dist = PolicyDistribution::from_logits(&[3.0f64.ln(), 0.0], None);
        assert!((dist.prob(0) - 0.75).abs() < 1e-12);
        assert!((dist.prob(1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn probabilities_form_a_distribution() {
        let dist = PolicyDistribution::from_logits(&[0.2, -1.5, 3.0, 0.0], None);
        assert!(dist.probs().iter().all(|&p| p >= 0.0));
        assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mask_zeroes_excluded_actions_and_renormalizes() {
        let dist = PolicyDistribution::from_logits(&[1.0, 2.0, 3.0], Some(&[0, 1]));
        assert_eq!(dist.prob(2), 0.0);
        assert!((dist.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let unmasked = PolicyDistribution::from_logits(&[1.0, 2.0], None);
        assert!((dist.prob(0) - unmasked.prob(0)).abs() < 1e-12);
    }

    #[test]
    fn sampling_matches_probabilities() {
        let dist = PolicyDistribution::from_logits(&[0.0, 3.0f64.ln()], None);
        let mut rng = rng_from_seed(42);
        let n = 100_000;
        let hits = (0..n).filter(|_| dist.sample(&mut rng) == 1).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn log_prob_grad_is_indicator_minus_probs() {
        let dist = PolicyDistribution::from_logits(&[0.5, -0.5, 0.0], None);
        let grad = dist.log_prob_grad(1);
        assert!((grad[0] + dist.prob(0)).abs() < 1e-12);
        assert!((grad[1] - (1.0 - dist.prob(1))).abs() < 1e-12);
        assert!((grad[2] + dist.prob(2)).abs() < 1e-12);
        assert!(grad.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn masked_log_prob_grad_stays_on_the_support() {
        let dist = PolicyDistribution::from_logits(&[1.0, 2.0, 3.0], Some(&[0, 1]));
        let grad = dist.log_prob_grad(0);
        assert_eq!(grad[2], 0.0);
        assert!(grad.iter().sum::<f64>().abs() < 1e-12);
    }
}
