//! Long-run statistics of the exploration noise.

use rq_core::agent::OuNoise;
use rq_core::rng::{self, domain};

const THETA: f64 = 0.15;
const SIGMA: f64 = 0.2;
/// Large enough that 10⁶ samples span many correlation times (1/(θ·dt) ≈ 67
/// steps), small enough that the discretisation bias stays below 1%.
const DT: f64 = 0.1;
const SAMPLES: usize = 1_000_000;
const BURN_IN: usize = 2_000;

fn series(seed: u64) -> Vec<[f64; 4]> {
    let mut ou = OuNoise::new(THETA, SIGMA);
    let mut r = rng::stream(seed, domain::EXPLORATION, 0, 0);
    for _ in 0..BURN_IN {
        ou.sample(DT, &mut r);
    }
    (0..SAMPLES).map(|_| ou.sample(DT, &mut r)).collect()
}

fn component(xs: &[[f64; 4]], c: usize) -> Vec<f64> {
    xs.iter().map(|x| x[c]).collect()
}

fn variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len() - lag;
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let cov = (0..n).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / n as f64;
    cov / variance(x)
}

#[test]
fn stationary_variance_matches_theory() {
    let xs = series(1);
    let expected = SIGMA * SIGMA / (2.0 * THETA);
    for c in 0..4 {
        let v = variance(&component(&xs, c));
        assert!(
            (v / expected - 1.0).abs() < 0.10,
            "component {c}: {v} vs {expected}"
        );
    }
}

#[test]
fn autocorrelation_decays_exponentially() {
    let xs = component(&series(2), 0);
    for k in [1, 10, 30] {
        let rho = autocorrelation(&xs, k);
        let expected = (-THETA * k as f64 * DT).exp();
        assert!(
            (rho - expected).abs() < 0.05,
            "lag {k}: {rho} vs {expected}"
        );
    }
}

#[test]
fn reset_returns_to_zero() {
    let mut ou = OuNoise::new(THETA, SIGMA);
    let mut r = rng::stream(3, domain::EXPLORATION, 0, 0);
    ou.sample(DT, &mut r);
    assert!(ou.value.iter().any(|&v| v != 0.0));
    ou.reset();
    assert_eq!(ou.value, [0.0; 4]);
}
