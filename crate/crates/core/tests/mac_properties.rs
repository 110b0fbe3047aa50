//! Distributional and pre-outcome properties of the selection paths.

use macrl_core::agent::{
    detect_error, AcquisitionRule, Agent, AgentConfig, HeadArch, MacConfig,
};
use macrl_core::envs::{Bandit, BanditConfig, Environment};
use macrl_core::rng::rng_from_seed;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn four_action_agent(seed: u64) -> Agent {
    Agent::init(
        AgentConfig {
            obs_dim: 1,
            action_count: 4,
            arch: HeadArch::Tabular,
        },
        seed,
    )
    .unwrap()
}

/// Two-sample chi-square homogeneity test on action counts.
fn chi_square_p(counts_a: &[u64], counts_b: &[u64]) -> f64 {
    let k = counts_a.len();
    let total_a: u64 = counts_a.iter().sum();
    let total_b: u64 = counts_b.iter().sum();
    let grand = (total_a + total_b) as f64;
    let mut stat = 0.0;
    for i in 0..k {
        let col = (counts_a[i] + counts_b[i]) as f64;
        for (count, total) in [(counts_a[i], total_a), (counts_b[i], total_b)] {
            let expected = col * total as f64 / grand;
            if expected > 0.0 {
                let diff = count as f64 - expected;
                stat += diff * diff / expected;
            }
        }
    }
    let dist = ChiSquared::new((k - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// With a budget of one, the inner loop reduces to plain policy sampling:
/// the two selection paths must be indistinguishable in distribution.
#[test]
fn budget_one_matches_vanilla_in_distribution() {
    let agent = four_action_agent(42);
    let n = 100_000;
    let mac = MacConfig {
        budget: 1,
        acquisition: AcquisitionRule::WithoutReplacement,
    };
    // Deliberately unmatched RNG streams.
    let mut rng_mac = rng_from_seed(1);
    let mut rng_vanilla = rng_from_seed(2);
    let mut counts_mac = [0u64; 4];
    let mut counts_vanilla = [0u64; 4];
    for _ in 0..n {
        let mut ep = agent.begin_episode(false);
        let a = agent
            .mac_select_action(&mut ep, &[1.0], None, &mac, &mut rng_mac)
            .unwrap()
            .action;
        counts_mac[a] += 1;
        let mut ep = agent.begin_episode(false);
        let b = agent
            .vanilla_select_action(&mut ep, &[1.0], None, &mut rng_vanilla)
            .unwrap()
            .action;
        counts_vanilla[b] += 1;
    }
    let p = chi_square_p(&counts_mac, &counts_vanilla);
    assert!(p > 0.01, "chi-square p = {p}, counts {counts_mac:?} vs {counts_vanilla:?}");
}

/// The record and the error flag exist in full before the environment is
/// stepped, and stepping changes neither: compared byte-for-byte.
#[test]
fn error_detection_is_decided_before_the_outcome() {
    let agent = Agent::init(
        AgentConfig {
            obs_dim: 1,
            action_count: 2,
            arch: HeadArch::Tabular,
        },
        7,
    )
    .unwrap();
    let mut env = Bandit::new(BanditConfig::default()).unwrap();
    let mut rng = rng_from_seed(3);
    for episode in 0..50 {
        let obs = env.reset(episode);
        let mut ep = agent.begin_episode(false);
        let outcome = agent
            .mac_select_action(&mut ep, &obs, None, &MacConfig::default(), &mut rng)
            .unwrap();

        let bytes_before = serde_json::to_vec(&outcome.record).unwrap();
        let flag_before = detect_error(&outcome.record);

        env.step(outcome.action).unwrap();

        let bytes_after = serde_json::to_vec(&outcome.record).unwrap();
        assert_eq!(bytes_before, bytes_after);
        assert_eq!(flag_before, detect_error(&outcome.record));
        assert_eq!(outcome.record.ground_truth_correct, None);
    }
}
