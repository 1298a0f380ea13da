//! Closed-form queueing results checked against the independent
//! birth–death chain oracle.

mod common;

use common::{chain_idle_probability, chain_stationary, chain_waiting_probability, TestRng};
use siglink::queueing::{
    idle_probability, state_probability, waiting_probability, DisplayQueueConfig,
};

const CAP: usize = 200;

fn cfg(u: u32, lambda: f64, mu: f64) -> DisplayQueueConfig {
    DisplayQueueConfig::new(1, u, lambda, mu).unwrap()
}

#[test]
fn mm1_state_probability_matches_chain() {
    let c = cfg(1, 0.5, 1.0);
    let pi = chain_stationary(1, 0.5, 1.0, CAP);
    for m in 0..40u32 {
        let p = state_probability(&c, m).unwrap();
        assert!(
            (p - pi[m as usize]).abs() < 1e-9,
            "m={m}: {p} vs chain {}",
            pi[m as usize]
        );
    }
    assert!((state_probability(&c, 2).unwrap() - 0.125).abs() < 1e-12);
}

#[test]
fn multi_channel_state_probability_matches_chain() {
    // a = 5 across the U boundary
    let c = cfg(10, 0.5, 0.1);
    let pi = chain_stationary(10, 0.5, 0.1, CAP);
    for m in 0..60u32 {
        let p = state_probability(&c, m).unwrap();
        assert!(
            (p - pi[m as usize]).abs() < 1e-9,
            "m={m}: {p} vs chain {}",
            pi[m as usize]
        );
    }
}

#[test]
fn idle_and_waiting_match_chain_oracle() {
    let cases = [(1u32, 0.5, 1.0), (2, 1.0, 1.0), (10, 0.5, 0.1), (5, 3.0, 1.0)];
    for (u, lambda, mu) in cases {
        let c = cfg(u, lambda, mu);
        let idle = idle_probability(&c).unwrap();
        let wait = waiting_probability(&c).unwrap();
        assert!(
            (idle - chain_idle_probability(u, lambda, mu, CAP)).abs() < 1e-9,
            "idle mismatch at U={u}"
        );
        assert!(
            (wait - chain_waiting_probability(u, lambda, mu, CAP)).abs() < 1e-9,
            "waiting mismatch at U={u}"
        );
    }
}

#[test]
fn random_stable_configs_match_chain() {
    let mut rng = TestRng::new(0xC0FFEE);
    for i in 0..50 {
        let u = rng.next_range(1, 20) as u32;
        let mu = 0.1 + rng.next_f64() * 1.9;
        // keep rho <= 0.9 so the m=200 truncation error stays below 1e-6
        let rho = 0.05 + rng.next_f64() * 0.85;
        let a = (rho * u as f64).min(8.0);
        let lambda = a * mu;
        let c = cfg(u, lambda, mu);
        let pi = chain_stationary(u, lambda, mu, CAP);
        for m in (0..40).chain([u, u + 1, u + 5].into_iter().map(|x| x.min(CAP as u32))) {
            let p = state_probability(&c, m).unwrap();
            assert!(
                (p - pi[m as usize]).abs() < 1e-6,
                "case {i} (U={u}, a={a:.3}): m={m}"
            );
        }
        let wait = waiting_probability(&c).unwrap();
        assert!(
            (wait - chain_waiting_probability(u, lambda, mu, CAP)).abs() < 1e-6,
            "case {i}: waiting probability"
        );
    }
}

#[test]
fn normalization_with_geometric_tail() {
    // sum of the first 201 states plus the analytic geometric tail is 1
    for (u, lambda, mu) in [(1u32, 0.5, 1.0), (3, 2.4, 1.0), (10, 0.8, 0.1)] {
        let c = cfg(u, lambda, mu);
        let mut sum = 0.0;
        for m in 0..=200u32 {
            sum += state_probability(&c, m).unwrap();
        }
        let rho = lambda / (u as f64 * mu);
        let tail = state_probability(&c, 200).unwrap() * rho / (1.0 - rho);
        assert!(
            (sum + tail - 1.0).abs() < 1e-9,
            "U={u}: sum {sum} + tail {tail}"
        );
    }
}

#[test]
fn state_probabilities_nonnegative() {
    let mut rng = TestRng::new(42);
    for _ in 0..20 {
        let u = rng.next_range(1, 15) as u32;
        let rho = rng.next_f64() * 0.95;
        let c = cfg(u, rho * u as f64, 1.0);
        for m in 0..100u32 {
            assert!(state_probability(&c, m).unwrap() >= 0.0);
        }
    }
}
