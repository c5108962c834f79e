use proptest::prelude::*;
use rand::Rng;
use tempered_core::diagnostics::batch_means_se;
use tempered_core::mixture::{
    gibbs_update_mu, gibbs_update_sigma2, load_galaxy_data, metropolis_update_z, mixture_energy,
    GalaxyData, MixtureFamily, MixturePrior, MixtureState,
};
use tempered_core::rng::{stream, Purpose};
use tempered_core::sampler::{run_base_chain, run_chain, RunConfig};
use tempered_core::{TargetFamily, TemperatureLadder};

const LN_2PI: f64 = 1.8378770664093453;

fn family() -> MixtureFamily {
    MixtureFamily::new(GalaxyData::bundled(), MixturePrior::default()).unwrap()
}

fn random_state(rng: &mut impl Rng, len: usize) -> MixtureState {
    let raw: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.05..1.0));
    let total: f64 = raw.iter().sum();
    MixtureState {
        z: (0..len).map(|_| rng.random_range(0..3u8)).collect(),
        w: raw.map(|v| v / total),
        mu: std::array::from_fn(|_| rng.random_range(5.0..35.0)),
        sigma2: std::array::from_fn(|_| rng.random_range(0.2..30.0)),
    }
}

/// Empirical CDF distance against a CDF tabulated on a grid from an
/// unnormalised log density.
fn ks_against_grid(draws: &mut [f64], log_density: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    // locate the bulk on a coarse pass, then tabulate 1000 points across it
    let coarse: Vec<f64> = (0..=20_000).map(|i| lo + (hi - lo) * i as f64 / 20_000.0).collect();
    let top = coarse.iter().map(|&x| log_density(x)).fold(f64::NEG_INFINITY, f64::max);
    let bulk: Vec<f64> = coarse.iter().copied().filter(|&x| log_density(x) > top - 40.0).collect();
    let (a, b) = (bulk[0] - (hi - lo) / 20_000.0, bulk[bulk.len() - 1] + (hi - lo) / 20_000.0);
    let grid: Vec<f64> = (0..1000).map(|i| a + (b - a) * i as f64 / 999.0).collect();
    let dens: Vec<f64> = grid.iter().map(|&x| (log_density(x) - top).exp()).collect();
    let mut cdf = vec![0.0; 1000];
    for i in 1..1000 {
        cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
    }
    let total = cdf[999];
    let cdf_at = |x: f64| {
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        let i = grid.partition_point(|&g| g <= x).clamp(1, 999);
        let t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
        (cdf[i - 1] + t * (cdf[i] - cdf[i - 1])) / total
    };
    draws.sort_by(f64::total_cmp);
    let m = draws.len() as f64;
    draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf_at(x);
            (c - i as f64 / m).abs().max((c - (i + 1) as f64 / m).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn energy_matches_naive_log_likelihood() {
    let data = GalaxyData::bundled();
    let mut rng = stream(1, Purpose::Replicate, 0);
    for _ in 0..20 {
        let state = random_state(&mut rng, 82);
        let log_lik: f64 = data
            .values()
            .iter()
            .zip(&state.z)
            .map(|(&y, &j)| {
                let (m, v) = (state.mu[j as usize], state.sigma2[j as usize]);
                ((-(y - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()).ln()
            })
            .sum();
        let expected = -log_lik - 41.0 * LN_2PI;
        let h = mixture_energy(&state, &data).unwrap();
        assert!((h - expected).abs() < 1e-9 * expected.abs().max(1.0), "{h} vs {expected}");
    }
}

#[test]
fn empty_component_contributes_nothing() {
    let data = GalaxyData::bundled();
    let mut state = family().quantile_start();
    state.z.iter_mut().for_each(|j| *j = if *j == 2 { 1 } else { *j });
    let base = mixture_energy(&state, &data).unwrap();
    state.mu[2] = -1e6;
    state.sigma2[2] = 1e-6;
    assert_eq!(mixture_energy(&state, &data).unwrap(), base);
}

#[test]
fn mu_conditional_matches_grid_density() {
    let data = GalaxyData::bundled();
    let prior = MixturePrior::default();
    for beta in [1.0, 0.2] {
        let mut state = family().quantile_start();
        let fixed = state.clone();
        let mut rng = stream(31, Purpose::Replicate, (beta * 10.0) as u32);
        let mut draws: Vec<f64> = (0..10_000)
            .map(|_| {
                gibbs_update_mu(&mut state, &data, &prior, beta, &mut rng);
                state.mu[0]
            })
            .collect();
        let ys: Vec<f64> = data.values().iter().zip(&fixed.z).filter(|(_, &j)| j == 0).map(|(&y, _)| y).collect();
        let log_density = |m: f64| {
            -beta * ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (2.0 * fixed.sigma2[0]) - m * m / 2000.0
        };
        let ks = ks_against_grid(&mut draws, &log_density, -100.0, 140.0);
        assert!(ks < 0.02, "beta {beta}: KS {ks}");
    }
}

#[test]
fn sigma2_conditional_matches_grid_density() {
    let data = GalaxyData::bundled();
    let prior = MixturePrior::default();
    let beta = 0.5;
    let mut state = family().quantile_start();
    let fixed = state.clone();
    let mut rng = stream(32, Purpose::Replicate, 0);
    let mut draws: Vec<f64> = (0..10_000)
        .map(|_| {
            gibbs_update_sigma2(&mut state, &data, &prior, beta, &mut rng);
            state.sigma2[1]
        })
        .collect();
    let ys: Vec<f64> = data.values().iter().zip(&fixed.z).filter(|(_, &j)| j == 1).map(|(&y, _)| y).collect();
    let ss: f64 = ys.iter().map(|y| (y - fixed.mu[1]).powi(2)).sum();
    // prior x^{-2} e^{-1/x} times the tempered likelihood
    let log_density = |v: f64| {
        if v <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -2.0 * v.ln() - 1.0 / v - beta * (0.5 * ys.len() as f64 * v.ln() + ss / (2.0 * v))
    };
    let ks = ks_against_grid(&mut draws, &log_density, 1e-6, 50.0);
    assert!(ks < 0.02, "KS {ks}");
}

#[test]
fn conditionals_revert_to_priors_as_beta_vanishes() {
    let data = GalaxyData::bundled();
    let prior = MixturePrior::default();
    let mut state = family().quantile_start();
    let mut rng = stream(3, Purpose::Replicate, 0);
    let m = 20_000;
    let (mut sum, mut sq, mut inv) = (0.0, 0.0, 0.0);
    for _ in 0..m {
        gibbs_update_mu(&mut state, &data, &prior, 1e-12, &mut rng);
        gibbs_update_sigma2(&mut state, &data, &prior, 1e-12, &mut rng);
        sum += state.mu[0];
        sq += state.mu[0] * state.mu[0];
        inv += 1.0 / state.sigma2[0];
    }
    let mean = sum / m as f64;
    assert!(mean.abs() < 4.0 * (1000.0 / m as f64).sqrt(), "mean {mean}");
    let var = sq / m as f64 - mean * mean;
    assert!((var / 1000.0 - 1.0).abs() < 0.05, "var {var}");
    // 1/σ² ~ Gamma(1, 1) under the prior
    assert!((inv / m as f64 - 1.0).abs() < 0.04);
}

#[test]
fn single_site_labels_match_enumeration() {
    let data = GalaxyData::new(vec![21.0]).unwrap();
    let w: [f64; 3] = [0.2, 0.5, 0.3];
    let mu: [f64; 3] = [19.5, 23.0, 21.4];
    let sigma2: [f64; 3] = [2.0, 4.0, 0.5];
    let weight = |j: usize| w[j] * (-(21.0 - mu[j]).powi(2) / (2.0 * sigma2[j])).exp() / sigma2[j].sqrt();
    let total: f64 = (0..3).map(weight).sum();
    let mut state = MixtureState { z: vec![0], w, mu, sigma2 };
    let mut rng = stream(4, Purpose::Replicate, 0);
    let scans = 100_000;
    let mut indicators = vec![Vec::with_capacity(scans); 3];
    for _ in 0..scans {
        metropolis_update_z(&mut state, &data, 1.0, false, &mut rng);
        for (j, ind) in indicators.iter_mut().enumerate() {
            ind.push((state.z[0] as usize == j) as u8 as f64);
        }
    }
    for (j, ind) in indicators.iter().enumerate() {
        let freq = ind.iter().sum::<f64>() / scans as f64;
        let se = batch_means_se(ind, 50).unwrap();
        let p = weight(j) / total;
        assert!((freq - p).abs() < 3.0 * se, "label {j}: {freq} vs {p}");
    }
}

#[test]
fn label_proposals_at_zero_temperature_follow_weights() {
    let data = GalaxyData::new(vec![10.0]).unwrap();
    // the likelihood would strongly favour label 0 at full temperature
    let w = [0.1, 0.6, 0.3];
    let mut state = MixtureState { z: vec![0], w, mu: [10.0, 40.0, 60.0], sigma2: [1.0; 3] };
    let mut rng = stream(6, Purpose::Replicate, 0);
    let scans = 60_000;
    let mut counts = [0.0; 3];
    for _ in 0..scans {
        metropolis_update_z(&mut state, &data, 0.0, false, &mut rng);
        counts[state.z[0] as usize] += 1.0;
    }
    for j in 0..3 {
        assert!((counts[j] / scans as f64 - w[j]).abs() < 0.015);
    }
}

#[test]
fn tempered_chain_preserves_hot_posterior() {
    // tempered transitions targeting β = 1/16 against plain Gibbs at the same temperature
    let fam = family();
    let beta = 1.0 / 16.0;
    let iterations = 30_000;
    let burn_in = 3_000;
    let mut config = RunConfig::new(TemperatureLadder::new(vec![beta, beta / 2.0, beta / 4.0]).unwrap(), iterations);
    config.burn_in = burn_in;
    config.base_moves_per_temper = 0;
    let mut rng = stream(77, Purpose::Chain, 0);
    let tempered = run_chain(&fam, &config, fam.quantile_start(), &mut rng).unwrap();
    assert!(tempered.summary.acceptance_rate > 0.2);
    let mut rng = stream(77, Purpose::Chain, 1);
    let plain = run_base_chain(&fam, beta, iterations, burn_in, 1, fam.quantile_start(), &mut rng).unwrap();

    let summaries = |rows: &[tempered_core::sampler::TraceRow]| {
        let energy: Vec<f64> = rows.iter().map(|r| r.energy).collect();
        let top_mu: Vec<f64> = rows.iter().map(|r| r.values[3..6].iter().copied().fold(f64::MIN, f64::max)).collect();
        [energy, top_mu]
    };
    for (a, b) in summaries(&tempered.trace).iter().zip(summaries(&plain.trace).iter()) {
        let (ma, mb) = (a.iter().sum::<f64>() / a.len() as f64, b.iter().sum::<f64>() / b.len() as f64);
        let se = (batch_means_se(a, 50).unwrap().powi(2) + batch_means_se(b, 50).unwrap().powi(2)).sqrt();
        assert!((ma - mb).abs() < 4.0 * se, "{ma} vs {mb} (se {se})");
    }
}

#[test]
fn loads_galaxy_file_with_trailing_blank_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("galaxies.txt");
    let text: String = GalaxyData::bundled().values().iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(&path, format!("{text}\n")).unwrap();
    assert_eq!(load_galaxy_data(&path).unwrap().values(), GalaxyData::bundled().values());
    std::fs::write(&path, "").unwrap();
    assert!(load_galaxy_data(&path).is_err());
    assert!(load_galaxy_data(dir.path().join("missing.txt")).is_err());
}

proptest! {
    #[test]
    fn energy_and_prior_are_label_invariant(seed in 0u64..5000, perm_index in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let fam = family();
        let mut rng = stream(seed, Purpose::Replicate, 2);
        let state = random_state(&mut rng, 82);
        let moved = state.permuted(perms[perm_index]);
        let (h, hp) = (fam.energy(&state), fam.energy(&moved));
        prop_assert!((h - hp).abs() <= 1e-9 * h.abs().max(1.0));
        let (l, lp) = (fam.log_base(&state), fam.log_base(&moved));
        prop_assert!((l - lp).abs() <= 1e-9 * l.abs().max(1.0));
    }

    #[test]
    fn kernels_keep_state_valid(seed in 0u64..5000, beta in 0.01f64..1.0) {
        let fam = family();
        let mut rng = stream(seed, Purpose::Chain, 3);
        let mut state = fam.quantile_start();
        for _ in 0..5 {
            fam.kernel(beta, &mut state, &mut rng);
            fam.reverse_kernel(beta, &mut state, &mut rng);
        }
        prop_assert!((state.w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(state.w.iter().all(|&w| w > 0.0));
        prop_assert!(state.sigma2.iter().all(|&v| v > 0.0));
        prop_assert!(state.z.iter().all(|&j| j < 3));
        prop_assert!(fam.energy(&state).is_finite());
    }
}
