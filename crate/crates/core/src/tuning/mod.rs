//! The expected log-rejection objective `S_n` and its minimisation.
//!
//! For a ladder `β_0 > … > β_n`,
//!
//! ```text
//! S_n = Σ_{i<n} (β_i − β_{i+1}) · (g(β_{i+1}) − g(β_i))
//! ```
//!
//! is the gap between the right- and left-endpoint Riemann sums of `g`, which
//! is also the expected value of `F′ − F` when every level equilibrates. Only
//! the interior temperatures are free; `β_0` and `β_n` stay fixed.

mod bfgs;
mod gfunction;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gfunction::{GFunction, Interpolation};

use crate::error::{Error, Result};
use crate::model::TemperatureLadder;
use crate::rng::{stream, Purpose};

/// `β_i = β_0 c^i` with `c = (β_n/β_0)^{1/n}`.
pub fn geometric_ladder(beta0: f64, betan: f64, n: usize) -> Result<TemperatureLadder> {
    if n == 0 {
        return Err(Error::InvalidParameter("ladder needs n >= 1".into()));
    }
    if !(betan > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "geometric spacing needs beta_n > 0, got {betan}"
        )));
    }
    if !(beta0 > betan) {
        return Err(Error::InvalidParameter(format!("beta_0={beta0} must exceed beta_n={betan}")));
    }
    let ratio = (betan / beta0).powf(1.0 / n as f64);
    let mut betas: Vec<f64> = (0..=n).map(|i| beta0 * ratio.powi(i as i32)).collect();
    betas[n] = betan;
    TemperatureLadder::new(betas)
}

/// Equally spaced inverse temperatures.
pub fn uniform_ladder(beta0: f64, betan: f64, n: usize) -> Result<TemperatureLadder> {
    if n == 0 {
        return Err(Error::InvalidParameter("ladder needs n >= 1".into()));
    }
    if !(beta0 > betan && betan >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need beta_0 > beta_n >= 0, got {beta0} and {betan}"
        )));
    }
    let width = (beta0 - betan) / n as f64;
    let mut betas: Vec<f64> = (0..=n).map(|i| beta0 - i as f64 * width).collect();
    betas[n] = betan;
    TemperatureLadder::new(betas)
}

fn g_values(ladder: &TemperatureLadder, g: &GFunction) -> Result<Vec<f64>> {
    ladder.betas().iter().map(|&b| g.value(b)).collect()
}

pub fn s_n(ladder: &TemperatureLadder, g: &GFunction) -> Result<f64> {
    let gv = g_values(ladder, g)?;
    Ok(ladder
        .widths()
        .zip(gv.windows(2))
        .map(|(w, pair)| w * (pair[1] - pair[0]))
        .sum())
}

/// `∂S_n/∂β_i` for the interior levels `i = 1..n`.
pub fn s_n_gradient(ladder: &TemperatureLadder, g: &GFunction) -> Result<Vec<f64>> {
    if ladder.n() < 2 {
        return Err(Error::InvalidParameter("gradient needs n >= 2".into()));
    }
    let b = ladder.betas();
    let gv = g_values(ladder, g)?;
    (1..ladder.n())
        .map(|i| {
            let curvature = gv[i - 1] - 2.0 * gv[i] + gv[i + 1];
            let spacing = b[i - 1] - 2.0 * b[i] + b[i + 1];
            Ok(curvature + spacing * g.derivative(b[i])?)
        })
        .collect()
}

/// `(1/n)(β_0 − β_n)(g(β_n) − g(β_0))`, the value of `S_n` for any ladder that
/// spaces either the `β`s or the `g(β)`s uniformly; the minimum can only be lower.
pub fn s_n_upper_bound(beta0: f64, betan: f64, n: usize, g: &GFunction) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    Ok((beta0 - betan) * (g.value(betan)? - g.value(beta0)?) / n as f64)
}

/// `Σ_i (KL[p_{i+1}, p_i] + KL[p_i, p_{i+1}])`, where `kl(i, j)` is `KL[p_i, p_j]`
/// for ladder levels `i` and `j`. Equal to `S_n` for an exact `g`: each pair of
/// divergences sums to `(β_i − β_{i+1})(g(β_{i+1}) − g(β_i))`.
pub fn symmetrized_kl_sum(
    ladder: &TemperatureLadder,
    kl: impl Fn(usize, usize) -> f64,
) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..ladder.n() {
        for (from, to) in [(i + 1, i), (i, i + 1)] {
            let value = kl(from, to);
            if value < 0.0 || value.is_nan() {
                return Err(Error::NegativeKl { from, to, value });
            }
            total += value;
        }
    }
    Ok(total)
}

/// Starting ladder for one run of the minimiser.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Geometric,
    Uniform,
    /// Uniform spacing perturbed by random log-increments; the index picks the stream.
    Random(u32),
    Explicit(String, Vec<f64>),
}

impl Start {
    pub fn label(&self) -> String {
        match self {
            Start::Geometric => "geometric".into(),
            Start::Uniform => "uniform".into(),
            Start::Random(i) => format!("random-{i}"),
            Start::Explicit(name, _) => name.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Relative per-iteration reduction of `S_n` below which the run stops.
    pub function_tolerance: f64,
    pub random_starts: u32,
    pub seed: u64,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            function_tolerance: 1e-14,
            random_starts: 0,
            seed: 0,
        }
    }
}

/// The geometric and uniform starts, plus `random_starts` perturbed ones.
/// Geometric is left out when `β_n = 0`.
pub fn default_starts(betan: f64, options: &TuningOptions) -> Vec<Start> {
    let mut starts = Vec::new();
    if betan > 0.0 {
        starts.push(Start::Geometric);
    }
    starts.push(Start::Uniform);
    starts.extend((0..options.random_starts).map(Start::Random));
    starts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    #[serde(rename = "beta")]
    pub ladder: TemperatureLadder,
    pub s_n: f64,
    /// Euclidean norm of `∂S_n/∂β_i` over the interior levels.
    pub gradient_norm: f64,
    pub converged: bool,
    #[serde(rename = "starts")]
    pub starts_used: Vec<String>,
    pub best_start: String,
    pub iterations: usize,
}

/// Maps unconstrained logits to a ladder: the `n` increments `β_i − β_{i+1}`
/// are a softmax of `(u_1, …, u_{n−1}, 0)` scaled to `β_0 − β_n`, so every
/// iterate is strictly ordered.
struct Simplex {
    beta0: f64,
    betan: f64,
    n: usize,
}

impl Simplex {
    fn increments(&self, u: &[f64]) -> Vec<f64> {
        let max = u.iter().copied().fold(0.0_f64, f64::max);
        let mut e: Vec<f64> = u.iter().map(|v| (v - max).exp()).collect();
        e.push((-max).exp());
        let total: f64 = e.iter().sum();
        e.iter_mut().for_each(|v| *v /= total);
        e
    }

    fn ladder(&self, u: &[f64]) -> Option<(TemperatureLadder, Vec<f64>)> {
        let delta = self.increments(u);
        let span = self.beta0 - self.betan;
        let mut betas = Vec::with_capacity(self.n + 1);
        let mut cum = 0.0;
        betas.push(self.beta0);
        for d in &delta[..self.n - 1] {
            cum += d;
            betas.push(self.beta0 - span * cum);
        }
        betas.push(self.betan);
        TemperatureLadder::new(betas).ok().map(|l| (l, delta))
    }

    fn logits(&self, ladder: &[f64]) -> Vec<f64> {
        let last = (ladder[self.n - 1] - ladder[self.n]).ln();
        (0..self.n - 1).map(|k| (ladder[k] - ladder[k + 1]).ln() - last).collect()
    }

    /// Chain rule from `∂S/∂β_i` (interior) to `∂S/∂u_j`.
    fn pull_back(&self, delta: &[f64], grad_beta: &[f64]) -> Vec<f64> {
        let span = self.beta0 - self.betan;
        // ∂S/∂δ_k = −span · Σ_{i>k} ∂S/∂β_i, interior i only
        let mut by_delta = vec![0.0; self.n];
        let mut tail = 0.0;
        for k in (0..self.n - 1).rev() {
            tail += grad_beta[k];
            by_delta[k] = -span * tail;
        }
        let mean: f64 = delta.iter().zip(&by_delta).map(|(d, g)| d * g).sum();
        (0..self.n - 1).map(|j| delta[j] * (by_delta[j] - mean)).collect()
    }
}

fn start_ladder(start: &Start, beta0: f64, betan: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(match start {
        Start::Geometric => geometric_ladder(beta0, betan, n)?.into_betas(),
        Start::Uniform => uniform_ladder(beta0, betan, n)?.into_betas(),
        Start::Random(i) => {
            let mut rng = stream(seed, Purpose::Tuning, *i);
            let weights: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0).exp()).collect();
            let total: f64 = weights.iter().sum();
            let mut betas = vec![beta0];
            let mut cum = 0.0;
            for w in &weights[..n - 1] {
                cum += w / total;
                betas.push(beta0 - (beta0 - betan) * cum);
            }
            betas.push(betan);
            betas
        }
        Start::Explicit(_, betas) => {
            let ladder = TemperatureLadder::new(betas.clone())?;
            if ladder.n() != n || ladder.target() != beta0 || ladder.hottest() != betan {
                return Err(Error::InvalidParameter("explicit start has the wrong shape".into()));
            }
            ladder.into_betas()
        }
    })
}

struct StartOutcome {
    ladder: TemperatureLadder,
    s_n: f64,
    converged: bool,
    iterations: usize,
}

fn run_start(
    g: &GFunction,
    simplex: &Simplex,
    initial: Vec<f64>,
    options: &TuningOptions,
) -> Result<StartOutcome> {
    let objective = |u: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (ladder, delta) = simplex.ladder(u)?;
        let value = s_n(&ladder, g).ok()?;
        let grad = s_n_gradient(&ladder, g).ok()?;
        value.is_finite().then(|| (value, simplex.pull_back(&delta, &grad)))
    };
    let opts = bfgs::BfgsOptions {
        max_iterations: options.max_iterations,
        gradient_tolerance: options.gradient_tolerance,
        function_tolerance: options.function_tolerance,
    };
    let u0 = simplex.logits(&initial);
    let out = bfgs::minimize(objective, u0, opts).ok_or_else(|| {
        Error::InvalidParameter("S_n cannot be evaluated at the starting ladder".into())
    })?;
    let ladder = simplex.ladder(&out.x).map(|(l, _)| l).ok_or_else(|| {
        Error::InvalidLadder("minimiser left the ordered region".into())
    })?;
    Ok(StartOutcome { ladder, s_n: out.f, converged: out.converged, iterations: out.iterations })
}

/// Minimises `S_n` over `β_1, …, β_{n−1}` from each start and keeps the best.
///
/// Starts run in parallel; ties within `1e-12` go to the start listed first.
pub fn minimize_s_n(
    g: &GFunction,
    beta0: f64,
    betan: f64,
    n: usize,
    starts: &[Start],
    options: &TuningOptions,
) -> Result<TuningResult> {
    if n < 2 {
        return Err(Error::InvalidParameter("tuning needs n >= 2".into()));
    }
    if !(beta0 > betan && betan >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need beta_0 > beta_n >= 0, got {beta0} and {betan}"
        )));
    }
    if starts.is_empty() {
        return Err(Error::Empty("no starting ladders"));
    }
    let simplex = Simplex { beta0, betan, n };
    let outcomes: Vec<Result<StartOutcome>> = starts
        .par_iter()
        .map(|start| {
            let initial = start_ladder(start, beta0, betan, n, options.seed)?;
            run_start(g, &simplex, initial, options)
        })
        .collect();

    let mut best: Option<(usize, StartOutcome)> = None;
    let mut first_err = None;
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => o.s_n < b.s_n - 1e-12,
                };
                if better {
                    best = Some((idx, o));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((idx, best)) = best else {
        return Err(first_err.expect("at least one start"));
    };
    let grad = s_n_gradient(&best.ladder, g)?;
    Ok(TuningResult {
        gradient_norm: grad.iter().map(|v| v * v).sum::<f64>().sqrt(),
        s_n: s_n(&best.ladder, g)?,
        ladder: best.ladder,
        converged: best.converged,
        starts_used: starts.iter().map(Start::label).collect(),
        best_start: starts[idx].label(),
        iterations: best.iterations,
    })
}
