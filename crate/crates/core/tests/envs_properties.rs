//! Monte Carlo properties of the 2AFC environment against the analytic
//! ideal observer: an observer deciding by the sign of summed left−right
//! evidence achieves accuracy Φ(aggregate d′ / √2).

use macrl_core::envs::{
    dprime_of_config, Environment, Side, TwoAfc, TwoAfcConfig, ACTION_LEFT, ACTION_RIGHT,
    ACTION_WAIT,
};
use statrs::distribution::{ContinuousCDF, Normal};

/// Runs the ideal observer for `episodes` episodes and returns its accuracy.
fn ideal_observer_accuracy(cfg: TwoAfcConfig, episodes: usize) -> f64 {
    let stimulus_steps = cfg.stimulus_steps;
    let mut env = TwoAfc::new(cfg).unwrap();
    let mut correct = 0usize;
    for episode in 0..episodes {
        let mut obs = env.reset(episode as u64);
        let mut evidence = 0.0;
        for step in 0..stimulus_steps {
            evidence += obs[0] - obs[1];
            let next = env.step(ACTION_WAIT).unwrap();
            obs = next.observation;
            let _ = step;
        }
        let action = if evidence > 0.0 { ACTION_LEFT } else { ACTION_RIGHT };
        let result = env.step(action).unwrap();
        if result.info.correct.unwrap() {
            correct += 1;
        }
    }
    correct as f64 / episodes as f64
}

fn phi(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

#[test]
fn ideal_observer_hits_the_analytic_ceiling() {
    let cfg = TwoAfcConfig {
        signal_mean: 0.4,
        ..TwoAfcConfig::default()
    };
    let d = dprime_of_config(&cfg).unwrap();
    let predicted = phi(d.aggregate / 2.0f64.sqrt());
    let accuracy = ideal_observer_accuracy(cfg, 100_000);
    assert!(
        (accuracy - predicted).abs() < 0.01,
        "accuracy {accuracy} vs predicted {predicted}"
    );
}

/// √n scaling: a quarter of the signal over four times the steps gives the
/// same aggregate sensitivity, hence the same ideal-observer accuracy.
#[test]
fn aggregate_dprime_scaling_confirmed_by_simulation() {
    let one_step = TwoAfcConfig {
        signal_mean: 1.0,
        stimulus_steps: 1,
        ..TwoAfcConfig::default()
    };
    let four_steps = TwoAfcConfig {
        signal_mean: 0.5,
        stimulus_steps: 4,
        seed: 1,
        ..TwoAfcConfig::default()
    };
    let d1 = dprime_of_config(&one_step).unwrap();
    let d4 = dprime_of_config(&four_steps).unwrap();
    assert!((d1.aggregate - 1.0).abs() < 1e-12);
    assert!((d4.aggregate - 1.0).abs() < 1e-12);

    let episodes = 1_000_000;
    let expected = phi(1.0 / 2.0f64.sqrt());
    let acc1 = ideal_observer_accuracy(one_step, episodes);
    let acc4 = ideal_observer_accuracy(four_steps, episodes);
    assert!((acc1 - expected).abs() < 0.002, "1-step accuracy {acc1} vs {expected}");
    assert!((acc4 - expected).abs() < 0.002, "4-step accuracy {acc4} vs {expected}");
}

#[test]
fn signal_sides_observed_match_ground_truth_info() {
    let mut env = TwoAfc::new(TwoAfcConfig {
        signal_mean: 50.0, // unmissable signal
        ..TwoAfcConfig::default()
    })
    .unwrap();
    for episode in 0..200 {
        let obs = env.reset(episode);
        let looks_left = obs[0] > obs[1];
        let truth = env.signal_side();
        assert_eq!(looks_left, truth == Side::Left);
    }
}
