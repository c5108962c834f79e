//! Three-component Gaussian mixture posterior for the galaxy velocities, with
//! only the likelihood tempered.
//!
//! Labels are stored as `0..3` internally and written as `1..=3`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TargetFamily;

pub const COMPONENTS: usize = 3;

/// Number of observations in the bundled data set.
pub const GALAXY_COUNT: usize = 82;

const BUNDLED: &str = include_str!("../data/galaxies.txt");

/// Observed velocities, in units of 1000 km/s for the bundled set.
#[derive(Debug, Clone, PartialEq)]
pub struct GalaxyData {
    y: Vec<f64>,
}

impl GalaxyData {
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty("data"));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data { line: i + 1, message: "value is not finite".into() });
        }
        Ok(Self { y })
    }

    /// The 82 galaxy velocities shipped with the crate.
    pub fn bundled() -> Self {
        parse_galaxy_text(BUNDLED).expect("bundled data is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Parses one number per line; blank lines are allowed only at the end.
pub fn parse_galaxy_text(text: &str) -> Result<GalaxyData> {
    let lines: Vec<&str> = text.lines().collect();
    let end = lines.iter().rposition(|l| !l.trim().is_empty()).map_or(0, |p| p + 1);
    let mut y = Vec::with_capacity(end);
    for (i, line) in lines[..end].iter().enumerate() {
        let field = line.trim();
        let value: f64 = field.parse().map_err(|_| Error::Data {
            line: i + 1,
            message: format!("cannot parse {field:?} as a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::Data { line: i + 1, message: "value is not finite".into() });
        }
        y.push(value);
    }
    if y.len() != GALAXY_COUNT {
        return Err(Error::Data {
            line: end.max(1),
            message: format!("expected {GALAXY_COUNT} values, found {}", y.len()),
        });
    }
    Ok(GalaxyData { y })
}

pub fn load_galaxy_data(path: impl AsRef<Path>) -> Result<GalaxyData> {
    parse_galaxy_text(&std::fs::read_to_string(path)?)
}

/// Conjugate priors: `w ~ Dirichlet(α, α, α)`, `μ_j ~ N(m, v)`,
/// `σ²_j ~ InvGamma(shape, rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixturePrior {
    pub dirichlet_alpha: f64,
    pub mu_mean: f64,
    pub mu_variance: f64,
    pub sigma2_shape: f64,
    pub sigma2_rate: f64,
}

impl Default for MixturePrior {
    fn default() -> Self {
        Self { dirichlet_alpha: 1.0, mu_mean: 0.0, mu_variance: 1000.0, sigma2_shape: 1.0, sigma2_rate: 1.0 }
    }
}

impl MixturePrior {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.dirichlet_alpha, self.mu_variance, self.sigma2_shape, self.sigma2_rate];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !self.mu_mean.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid mixture prior {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    /// Component of each observation, `0..3`.
    pub z: Vec<u8>,
    pub w: [f64; COMPONENTS],
    pub mu: [f64; COMPONENTS],
    pub sigma2: [f64; COMPONENTS],
}

impl MixtureState {
    pub fn counts(&self) -> [usize; COMPONENTS] {
        let mut n = [0; COMPONENTS];
        self.z.iter().for_each(|&j| n[j as usize] += 1);
        n
    }

    /// Applies the label permutation `j → perm[j]` to every component quantity.
    pub fn permuted(&self, perm: [usize; COMPONENTS]) -> Self {
        let mut out = self.clone();
        for j in 0..COMPONENTS {
            out.w[perm[j]] = self.w[j];
            out.mu[perm[j]] = self.mu[j];
            out.sigma2[perm[j]] = self.sigma2[j];
        }
        out.z = self.z.iter().map(|&j| perm[j as usize] as u8).collect();
        out
    }
}

/// Per-component count, sum and sum of squared deviations from `mu`.
fn suff_stats(state: &MixtureState, y: &[f64]) -> ([f64; COMPONENTS], [f64; COMPONENTS], [f64; COMPONENTS]) {
    let (mut n, mut s, mut ss) = ([0.0; COMPONENTS], [0.0; COMPONENTS], [0.0; COMPONENTS]);
    for (&j, &yi) in state.z.iter().zip(y) {
        let j = j as usize;
        n[j] += 1.0;
        s[j] += yi;
        ss[j] += (yi - state.mu[j]).powi(2);
    }
    (n, s, ss)
}

/// `h = Σ_j [(n_j/2) log σ²_j + SS_j / (2σ²_j)]`, the negative log-likelihood
/// without its `(N/2) log 2π` constant.
pub fn mixture_energy(state: &MixtureState, data: &GalaxyData) -> Result<f64> {
    if state.z.len() != data.len() {
        return Err(Error::InvalidParameter("label and data lengths differ".into()));
    }
    if let Some(j) = state.sigma2.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(format!("sigma2[{j}] must be positive")));
    }
    if state.z.iter().any(|&j| j as usize >= COMPONENTS) {
        return Err(Error::InvalidParameter("label out of range".into()));
    }
    let (n, _, ss) = suff_stats(state, data.values());
    Ok((0..COMPONENTS)
        .filter(|&j| n[j] > 0.0)
        .map(|j| 0.5 * n[j] * state.sigma2[j].ln() + ss[j] / (2.0 * state.sigma2[j]))
        .sum())
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, scale).expect("positive gamma parameters").sample(rng)
}

/// `w ~ Dirichlet(α + n_1, α + n_2, α + n_3)`. Not tempered.
pub fn gibbs_update_w<R: Rng + ?Sized>(state: &mut MixtureState, prior: &MixturePrior, rng: &mut R) {
    let n = state.counts();
    loop {
        let draws: [f64; COMPONENTS] =
            std::array::from_fn(|j| gamma_draw(prior.dirichlet_alpha + n[j] as f64, 1.0, rng));
        let total: f64 = draws.iter().sum();
        if draws.iter().all(|&d| d > 0.0) && total.is_finite() {
            state.w = draws.map(|d| d / total);
            return;
        }
    }
}

/// `μ_j` from its tempered conditional given `z` and `σ²`.
pub fn gibbs_update_mu<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &GalaxyData,
    prior: &MixturePrior,
    beta: f64,
    rng: &mut R,
) {
    let (n, s, _) = suff_stats(state, data.values());
    for j in 0..COMPONENTS {
        let precision = beta * n[j] / state.sigma2[j] + 1.0 / prior.mu_variance;
        let mean = (beta * s[j] / state.sigma2[j] + prior.mu_mean / prior.mu_variance) / precision;
        let z: f64 = rng.sample(StandardNormal);
        state.mu[j] = mean + z / precision.sqrt();
    }
}

/// `σ²_j ~ InvGamma(shape + β n_j / 2, rate + β SS_j / 2)` given `z` and `μ`.
pub fn gibbs_update_sigma2<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &GalaxyData,
    prior: &MixturePrior,
    beta: f64,
    rng: &mut R,
) {
    let (n, _, ss) = suff_stats(state, data.values());
    for j in 0..COMPONENTS {
        let shape = prior.sigma2_shape + 0.5 * beta * n[j];
        let rate = prior.sigma2_rate + 0.5 * beta * ss[j];
        loop {
            let v = 1.0 / gamma_draw(shape, 1.0 / rate, rng);
            if v > 0.0 && v.is_finite() {
                state.sigma2[j] = v;
                break;
            }
        }
    }
}

/// Single-site Metropolis updates of each `z_i`, in the given order.
///
/// Each proposal picks one of the two other labels uniformly and is accepted
/// with probability `min{1, w_k φ(y_i; μ_k, σ²_k)^β / (w_j φ(y_i; μ_j, σ²_j)^β)}`.
pub fn metropolis_update_z<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &GalaxyData,
    beta: f64,
    reverse: bool,
    rng: &mut R,
) {
    let log_w = state.w.map(f64::ln);
    let log_norm: [f64; COMPONENTS] = std::array::from_fn(|j| log_w[j] - 0.5 * beta * state.sigma2[j].ln());
    let half_prec = state.sigma2.map(|v| 0.5 * beta / v);
    let score = |j: usize, y: f64| log_norm[j] - half_prec[j] * (y - state.mu[j]).powi(2);
    let y = data.values();
    let visit = |i: usize, z: &mut Vec<u8>, rng: &mut R| {
        let current = z[i] as usize;
        let proposed = (current + 1 + rng.random_range(0..COMPONENTS - 1)) % COMPONENTS;
        let log_ratio = score(proposed, y[i]) - score(current, y[i]);
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            z[i] = proposed as u8;
        }
    };
    let mut z = std::mem::take(&mut state.z);
    if reverse {
        (0..y.len()).rev().for_each(|i| visit(i, &mut z, rng));
    } else {
        (0..y.len()).for_each(|i| visit(i, &mut z, rng));
    }
    state.z = z;
}

/// The tempered mixture posterior as a [`TargetFamily`].
///
/// One kernel application updates `w`, `μ`, `σ²` and then each `z_i` in
/// order. The reverse kernel runs the same updates in the opposite order.
#[derive(Debug, Clone)]
pub struct MixtureFamily {
    data: GalaxyData,
    prior: MixturePrior,
    include_z: bool,
}

impl MixtureFamily {
    pub fn new(data: GalaxyData, prior: MixturePrior) -> Result<Self> {
        prior.validate()?;
        Ok(Self { data, prior, include_z: false })
    }

    /// Also write the labels as trace columns `z_1..z_N`.
    pub fn with_labels_in_trace(mut self, include: bool) -> Self {
        self.include_z = include;
        self
    }

    pub fn data(&self) -> &GalaxyData {
        &self.data
    }

    pub fn prior(&self) -> &MixturePrior {
        &self.prior
    }

    /// Sorted data split into three near-equal groups; `μ`, `σ²` at group
    /// moments, equal weights.
    pub fn quantile_start(&self) -> MixtureState {
        let y = self.data.values();
        let len = y.len();
        let mut order: Vec<usize> = (0..len).collect();
        order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
        let mut z = vec![0u8; len];
        for (rank, &i) in order.iter().enumerate() {
            z[i] = (rank * COMPONENTS / len) as u8;
        }
        let mut state = MixtureState { z, w: [1.0 / COMPONENTS as f64; COMPONENTS], mu: [0.0; COMPONENTS], sigma2: [1.0; COMPONENTS] };
        let (n, s, _) = suff_stats(&state, y);
        for j in 0..COMPONENTS {
            if n[j] > 0.0 {
                state.mu[j] = s[j] / n[j];
            }
        }
        let (_, _, ss) = suff_stats(&state, y);
        for j in 0..COMPONENTS {
            if n[j] > 0.0 && ss[j] > 0.0 {
                state.sigma2[j] = ss[j] / n[j];
            }
        }
        state
    }
}

impl TargetFamily for MixtureFamily {
    type State = MixtureState;

    fn energy(&self, state: &MixtureState) -> f64 {
        mixture_energy(state, &self.data).unwrap_or(f64::NAN)
    }

    fn log_base(&self, state: &MixtureState) -> f64 {
        let p = &self.prior;
        let n = state.counts();
        (0..COMPONENTS)
            .map(|j| {
                let log_w = state.w[j].ln();
                (p.dirichlet_alpha - 1.0 + n[j] as f64) * log_w
                    - (state.mu[j] - p.mu_mean).powi(2) / (2.0 * p.mu_variance)
                    - (p.sigma2_shape + 1.0) * state.sigma2[j].ln()
                    - p.sigma2_rate / state.sigma2[j]
            })
            .sum()
    }

    fn kernel<R: Rng + ?Sized>(&self, beta: f64, state: &mut MixtureState, rng: &mut R) {
        gibbs_update_w(state, &self.prior, rng);
        gibbs_update_mu(state, &self.data, &self.prior, beta, rng);
        gibbs_update_sigma2(state, &self.data, &self.prior, beta, rng);
        metropolis_update_z(state, &self.data, beta, false, rng);
    }

    fn reverse_kernel<R: Rng + ?Sized>(&self, beta: f64, state: &mut MixtureState, rng: &mut R) {
        metropolis_update_z(state, &self.data, beta, true, rng);
        gibbs_update_sigma2(state, &self.data, &self.prior, beta, rng);
        gibbs_update_mu(state, &self.data, &self.prior, beta, rng);
        gibbs_update_w(state, &self.prior, rng);
    }

    fn initial_state<R: Rng + ?Sized>(&self, _beta: f64, _rng: &mut R) -> MixtureState {
        self.quantile_start()
    }

    fn state_columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        for name in ["w", "mu", "sigma2"] {
            cols.extend((1..=COMPONENTS).map(|j| format!("{name}_{j}")));
        }
        if self.include_z {
            cols.extend((1..=self.data.len()).map(|i| format!("z_{i}")));
        }
        cols
    }

    fn state_values(&self, state: &MixtureState) -> Vec<f64> {
        let mut vals: Vec<f64> = state.w.iter().chain(&state.mu).chain(&state.sigma2).copied().collect();
        if self.include_z {
            vals.extend(state.z.iter().map(|&j| (j + 1) as f64));
        }
        vals
    }
}
