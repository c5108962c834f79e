mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use tempered_core::diagnostics::{acceptance_rate, group_centered_iact, iact, Center};
use tempered_core::rng::{stream, Purpose};
use tempered_core::sampler::{run_chain, RunConfig};
use tempered_core::targets::WitchsHat;
use tempered_core::tuning::geometric_ladder;
use tempered_core::TargetFamily;

/// Same truncation rule, autocovariances summed directly.
fn brute_force_tau(trace: &[f64], center: f64) -> f64 {
    let n = trace.len();
    let z: Vec<f64> = trace.iter().map(|v| v - center).collect();
    let gamma = |k: usize| (0..n - k).map(|t| z[t] * z[t + k]).sum::<f64>() / n as f64;
    let var = gamma(0);
    let mut tau = 1.0;
    let mut k = 1;
    while k + 1 < n {
        let pair = (gamma(k) + gamma(k + 1)) / var;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    tau
}

fn ar1(len: usize, phi: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Purpose::Replicate, 0);
    let mut x = 0.0;
    (0..len)
        .map(|_| {
            x = phi * x + rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

#[test]
fn fft_estimate_matches_brute_force() {
    let z = ar1(3000, 0.9, 1);
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let fast = iact(&z, Center::SampleMean).unwrap().tau;
    assert!((fast - brute_force_tau(&z, mean)).abs() < 1e-8);
}

#[test]
fn duplicated_trace_roughly_doubles_tau() {
    let z = ar1(20_000, 0.5, 2);
    let doubled: Vec<f64> = z.iter().flat_map(|&v| [v, v]).collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let single = iact(&z, Center::SampleMean).unwrap().tau;
    let double = iact(&doubled, Center::SampleMean).unwrap().tau;
    assert!((double - brute_force_tau(&doubled, mean)).abs() < 1e-6);
    let ratio = double / single;
    assert!((ratio - 2.0).abs() < 0.25, "ratio {ratio}");
}

#[test]
fn sample_mean_centring_is_shift_invariant_fixed_is_not() {
    let z = ar1(5000, 0.3, 3);
    let shifted: Vec<f64> = z.iter().map(|v| v + 5.0).collect();
    let a = iact(&z, Center::SampleMean).unwrap().tau;
    let b = iact(&shifted, Center::SampleMean).unwrap().tau;
    assert!((a - b).abs() < 1e-6);
    let fixed_a = iact(&z, Center::Fixed(0.0)).unwrap().tau;
    let fixed_b = iact(&shifted, Center::Fixed(0.0)).unwrap().tau;
    assert!(fixed_b > 10.0 * fixed_a);
}

#[test]
fn separated_non_switching_chains_are_flagged() {
    // levels chosen so that no chain sits on the grand mean
    let levels = [1.0, 2.0, 4.0];
    let traces: Vec<Vec<f64>> = (0..3)
        .map(|j| ar1(10_000, 0.2, 10 + j as u64).iter().map(|v| levels[j] + 0.05 * v).collect())
        .collect();
    let refs: Vec<&[f64]> = traces.iter().map(|t| t.as_slice()).collect();
    for est in group_centered_iact(&refs).unwrap() {
        assert!(!est.reliable, "tau {}", est.tau);
    }
    for t in &traces {
        assert!(iact(t, Center::SampleMean).unwrap().reliable);
    }
}

#[test]
fn geometric_two_level_witch_tau_is_large() {
    let family = WitchsHat::new(CONCAVE.0, CONCAVE.1).unwrap();
    let mut config = RunConfig::new(geometric_ladder(1.0, BETA_N, 2).unwrap(), 500_000);
    config.base_moves_per_temper = 0;
    let mut rng = stream(2024, Purpose::Chain, 0);
    let init = family.exact_sample(1.0, &mut rng).unwrap();
    let out = run_chain(&family, &config, init, &mut rng).unwrap();
    let xs: Vec<f64> = out.trace.iter().map(|r| r.values[0]).collect();
    let tau = iact(&xs, Center::Fixed(family.theoretical_mean())).unwrap().tau;
    // expected near 591; the estimator is heavy-tailed, so allow a factor of two
    assert!(tau > 591.0 / 2.0 && tau < 591.0 * 2.0, "tau {tau}");
}

proptest! {
    #[test]
    fn tau_is_at_least_one(values in prop::collection::vec(-100.0f64..100.0, 100..400)) {
        let est = iact(&values, Center::SampleMean).unwrap();
        prop_assert!(est.tau >= 1.0 - 1e-6);
    }

    #[test]
    fn acceptance_rate_ignores_order(mut flags in prop::collection::vec(any::<bool>(), 1..200), seed in 0u64..100) {
        let before = acceptance_rate(&flags).unwrap();
        let mut rng = stream(seed, Purpose::Replicate, 1);
        for i in (1..flags.len()).rev() {
            let j = rng.random_range(0..=i);
            flags.swap(i, j);
        }
        prop_assert_eq!(before, acceptance_rate(&flags).unwrap());
    }
}
