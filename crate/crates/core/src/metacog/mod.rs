//! Metacognition analytics: how well do the agent's self-flagged errors
//! line up with its actual mistakes?
//!
//! The accumulator is a four-cell joint count over
//! {detected, not-detected} × {correct, incorrect}. Counts merge
//! associatively and commutatively, so partial statistics from parallel
//! workers can be combined in any order.

use serde::Serialize;

use crate::agent::{detect_error, ConfidenceRecord};
use crate::error::CoreError;
use crate::Result;

/// One analyzed decision: the agent's self-evaluation plus ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub record: ConfidenceRecord,
    /// Base-policy probability of the chosen action, in [0, 1].
    pub policy_prob: f64,
    /// Ground truth from the environment.
    pub correct: bool,
    /// The agent's own flag; always `detect_error(&record)`.
    pub detected: bool,
}

impl TrialOutcome {
    pub fn new(record: ConfidenceRecord, policy_prob: f64, correct: bool) -> Self {
        let detected = detect_error(&record);
        Self {
            record,
            policy_prob,
            correct,
            detected,
        }
    }
}

/// Joint frequencies over detection × correctness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionStats {
    pub detected_incorrect: u64,
    pub detected_correct: u64,
    pub missed_incorrect: u64,
    pub missed_correct: u64,
}

impl ConfusionStats {
    pub fn add(&mut self, outcome: &TrialOutcome) {
        match (outcome.detected, outcome.correct) {
            (true, false) => self.detected_incorrect += 1,
            (true, true) => self.detected_correct += 1,
            (false, false) => self.missed_incorrect += 1,
            (false, true) => self.missed_correct += 1,
        }
    }

    /// Associative, commutative combination of partial counts.
    pub fn merge(&self, other: &ConfusionStats) -> ConfusionStats {
        ConfusionStats {
            detected_incorrect: self.detected_incorrect + other.detected_incorrect,
            detected_correct: self.detected_correct + other.detected_correct,
            missed_incorrect: self.missed_incorrect + other.missed_incorrect,
            missed_correct: self.missed_correct + other.missed_correct,
        }
    }

    pub fn trials(&self) -> u64 {
        self.detected_incorrect + self.detected_correct + self.missed_incorrect + self.missed_correct
    }

    /// (det∧inc, det∧cor, ¬det∧inc, ¬det∧cor), summing to 1.
    pub fn frequencies(&self) -> [f64; 4] {
        let n = self.trials() as f64;
        [
            self.detected_incorrect as f64 / n,
            self.detected_correct as f64 / n,
            self.missed_incorrect as f64 / n,
            self.missed_correct as f64 / n,
        ]
    }
}

/// Exact joint frequencies over a stream of outcomes. At least one trial is
/// required; rates over an empty stream are meaningless.
pub fn accumulate<'a, I>(outcomes: I) -> Result<ConfusionStats>
where
    I: IntoIterator<Item = &'a TrialOutcome>,
{
    let mut stats = ConfusionStats::default();
    for outcome in outcomes {
        stats.add(outcome);
    }
    if stats.trials() == 0 {
        return Err(CoreError::NotEnoughSamples { needed: 1, got: 0 });
    }
    Ok(stats)
}

/// Detection quality derived from a [`ConfusionStats`]. `None` marks an
/// undefined rate (zero denominator), never silently zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionReport {
    /// P(incorrect | detected)
    pub precision: Option<f64>,
    /// P(detected | incorrect)
    pub recall: Option<f64>,
    /// P(correct): plain task accuracy.
    pub accuracy: f64,
    /// P(incorrect): what precision must beat to be better than chance.
    pub base_error_rate: f64,
    pub better_than_chance: Option<bool>,
    pub trials: u64,
}

pub fn detection_report(stats: &ConfusionStats) -> DetectionReport {
    let n = stats.trials() as f64;
    let detected = stats.detected_incorrect + stats.detected_correct;
    let incorrect = stats.detected_incorrect + stats.missed_incorrect;
    let precision = (detected > 0).then(|| stats.detected_incorrect as f64 / detected as f64);
    let recall = (incorrect > 0).then(|| stats.detected_incorrect as f64 / incorrect as f64);
    let base_error_rate = incorrect as f64 / n;
    DetectionReport {
        precision,
        recall,
        accuracy: (stats.detected_correct + stats.missed_correct) as f64 / n,
        base_error_rate,
        better_than_chance: precision.map(|p| p > base_error_rate),
        trials: stats.trials(),
    }
}

/// Fixed-width histogram of detections by the policy's probability of the
/// chosen action: bins [0.0,0.1) … [0.9,1.0].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PolicyProbBin {
    pub detected: u64,
    pub total: u64,
}

pub const POLICY_PROB_BINS: usize = 10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PolicyProbHistogram {
    pub bins: [PolicyProbBin; POLICY_PROB_BINS],
}

impl PolicyProbHistogram {
    pub fn bounds(index: usize) -> (f64, f64) {
        (index as f64 / 10.0, (index + 1) as f64 / 10.0)
    }
}

/// Bins every outcome by policy probability and counts how many were
/// flagged. Probability 1.0 lands in the final (closed) bin. An empty
/// stream yields the zero histogram.
pub fn detection_by_policy_probability<'a, I>(outcomes: I) -> PolicyProbHistogram
where
    I: IntoIterator<Item = &'a TrialOutcome>,
{
    let mut hist = PolicyProbHistogram::default();
    for outcome in outcomes {
        let index = ((outcome.policy_prob * 10.0).floor() as usize).min(POLICY_PROB_BINS - 1);
        hist.bins[index].total += 1;
        if outcome.detected {
            hist.bins[index].detected += 1;
        }
    }
    hist
}

/// Sample d′: (mean_s − mean_n) / sqrt(0.5 (var_s + var_n)) with unbiased
/// variances. Needs at least two samples per class and nonzero pooled
/// variance.
pub fn empirical_dprime(signal: &[f64], noise: &[f64]) -> Result<f64> {
    for class in [signal, noise] {
        if class.len() < 2 {
            return Err(CoreError::NotEnoughSamples {
                needed: 2,
                got: class.len(),
            });
        }
    }
    let stats = |xs: &[f64]| {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        (mean, var)
    };
    let (mean_s, var_s) = stats(signal);
    let (mean_n, var_n) = stats(noise);
    let pooled = 0.5 * (var_s + var_n);
    if pooled <= 0.0 {
        return Err(CoreError::Undefined(
            "d-prime needs nonzero variance in at least one class",
        ));
    }
    Ok((mean_s - mean_n) / pooled.sqrt())
}
