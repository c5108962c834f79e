//! Monte Carlo estimation of `g(β) = E_β[h]` and `g′(β) = −Var_β[h]` on a grid.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::batch_means_se;
use crate::error::{Error, Result};
use crate::model::TargetFamily;
use crate::rng::{stream, Purpose};
use crate::sampler::run_base_chain;
use crate::tuning::{GFunction, Interpolation};

/// Importance estimates with a smaller effective sample size are discarded.
pub const MIN_ESS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationConfig {
    pub grid_size: usize,
    pub samples: usize,
    pub burn_in: usize,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self { grid_size: 20, samples: 10_000, burn_in: 1_000 }
    }
}

/// Estimates of `g` and `g′` at each grid point.
///
/// Importance estimates come from the sample at the next smaller grid value,
/// so the first point never has one. Averages fall back to the direct
/// estimate where the importance estimate is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCurve {
    pub grid: Vec<f64>,
    pub g_direct: Vec<f64>,
    pub g_importance: Vec<Option<f64>>,
    pub g_avg: Vec<f64>,
    pub gp_direct: Vec<f64>,
    pub gp_importance: Vec<Option<f64>>,
    pub gp_avg: Vec<f64>,
    pub ess: Vec<Option<f64>>,
    /// Batch-means standard error of each direct `g` estimate.
    pub se_direct: Vec<f64>,
    pub se_importance: Vec<Option<f64>>,
    pub sample_count: usize,
    pub burn_in: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceEstimate {
    pub g: f64,
    pub g_prime: f64,
    pub ess: f64,
    /// `√(Σ w_j² (h_j − ĝ)²)`, the delta-method standard error for independent draws.
    pub se: f64,
}

/// Self-normalised weights `w_j ∝ exp(−(β_target − β_src) h_j)`.
pub fn importance_weights(energies: &[f64], beta_src: f64, beta_target: f64) -> Result<Vec<f64>> {
    if energies.is_empty() {
        return Err(Error::Empty("importance sample"));
    }
    if let Some(&bad) = energies.iter().find(|h| !h.is_finite()) {
        return Err(Error::NonFiniteEnergy(bad));
    }
    let delta = beta_target - beta_src;
    let logs: Vec<f64> = energies.iter().map(|h| -delta * h).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateWeights);
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Reweights energies drawn at `beta_src` to estimate `g` and `g′` at `beta_target`.
pub fn importance_estimate(
    energies: &[f64],
    beta_src: f64,
    beta_target: f64,
) -> Result<ImportanceEstimate> {
    if !(beta_target >= beta_src) {
        return Err(Error::InvalidParameter(format!(
            "importance target {beta_target} lies below source {beta_src}"
        )));
    }
    let w = importance_weights(energies, beta_src, beta_target)?;
    // shifted by the first energy so a constant sample reproduces itself exactly
    let h0 = energies[0];
    let g = h0 + w.iter().zip(energies).map(|(w, h)| w * (h - h0)).sum::<f64>();
    let var: f64 = w.iter().zip(energies).map(|(w, h)| w * (h - g) * (h - g)).sum();
    let ess = 1.0 / w.iter().map(|w| w * w).sum::<f64>();
    let se = w.iter().zip(energies).map(|(w, h)| (w * (h - g)).powi(2)).sum::<f64>().sqrt();
    Ok(ImportanceEstimate { g, g_prime: -var, ess, se })
}

/// `n` uniformly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "grid needs at least 2 points on a proper interval, got {n} on [{lo}, {hi}]"
        )));
    }
    let step = (hi - lo) / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|k| lo + step * k as f64).collect();
    grid[n - 1] = hi;
    Ok(grid)
}

fn direct_se(energies: &[f64]) -> f64 {
    const BATCHES: usize = 50;
    if energies.len() >= 10 * BATCHES {
        if let Ok(se) = batch_means_se(energies, BATCHES) {
            return se;
        }
    }
    let m = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / m;
    let var = energies.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / m;
    (var / m).sqrt()
}

/// Runs an independent base chain at each grid point and builds a [`GCurve`].
///
/// Grid point `k` draws from its own stream derived from `seed`, so the
/// result does not depend on how the points are scheduled.
pub fn estimate_grid<F: TargetFamily>(
    family: &F,
    beta0: f64,
    betan: f64,
    config: &EstimationConfig,
    seed: u64,
) -> Result<GCurve> {
    if config.samples <= config.burn_in {
        return Err(Error::InvalidParameter(format!(
            "samples ({}) must exceed burn-in ({})",
            config.samples, config.burn_in
        )));
    }
    let grid = uniform_grid(betan, beta0, config.grid_size)?;
    let samples: Vec<Vec<f64>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &beta)| {
            let mut rng = stream(seed, Purpose::GridPoint, k as u32);
            let initial = family.initial_state(beta, &mut rng);
            let run = run_base_chain(family, beta, config.samples, config.burn_in, 1, initial, &mut rng)?;
            let energies: Vec<f64> = run.trace.iter().map(|row| row.energy).collect();
            if let Some(&bad) = energies.iter().find(|h| !h.is_finite()) {
                return Err(Error::NonFiniteEnergy(bad));
            }
            Ok(energies)
        })
        .collect::<Result<_>>()?;
    curve_from_samples(grid, &samples, config.samples, config.burn_in)
}

/// Builds a curve from retained energies already drawn at each grid point.
pub fn curve_from_samples(
    grid: Vec<f64>,
    samples: &[Vec<f64>],
    sample_count: usize,
    burn_in: usize,
) -> Result<GCurve> {
    if grid.len() != samples.len() || grid.len() < 2 {
        return Err(Error::InvalidParameter("need one sample per grid point, at least two".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let k = grid.len();
    let mut curve = GCurve {
        grid,
        g_direct: Vec::with_capacity(k),
        g_importance: Vec::with_capacity(k),
        g_avg: Vec::with_capacity(k),
        gp_direct: Vec::with_capacity(k),
        gp_importance: Vec::with_capacity(k),
        gp_avg: Vec::with_capacity(k),
        ess: Vec::with_capacity(k),
        se_direct: Vec::with_capacity(k),
        se_importance: Vec::with_capacity(k),
        sample_count,
        burn_in,
    };
    for (i, energies) in samples.iter().enumerate() {
        let beta = curve.grid[i];
        let direct = importance_estimate(energies, beta, beta)?;
        let indirect = if i == 0 {
            None
        } else {
            match importance_estimate(&samples[i - 1], curve.grid[i - 1], beta) {
                Ok(est) if est.ess >= MIN_ESS => Some(est),
                Ok(_) | Err(Error::DegenerateWeights) => None,
                Err(e) => return Err(e),
            }
        };
        curve.g_direct.push(direct.g);
        curve.gp_direct.push(direct.g_prime);
        curve.se_direct.push(direct_se(energies));
        curve.g_importance.push(indirect.map(|e| e.g));
        curve.gp_importance.push(indirect.map(|e| e.g_prime));
        curve.ess.push(indirect.map(|e| e.ess));
        curve.se_importance.push(indirect.map(|e| e.se));
        curve.g_avg.push(indirect.map_or(direct.g, |e| 0.5 * (direct.g + e.g)));
        curve.gp_avg.push(indirect.map_or(direct.g_prime, |e| 0.5 * (direct.g_prime + e.g_prime)));
    }
    Ok(curve)
}

impl GCurve {
    /// Standard error of `g_avg[k]`, treating the two estimates as independent.
    pub fn se_avg(&self, k: usize) -> f64 {
        match self.se_importance[k] {
            Some(si) => 0.5 * (self.se_direct[k].powi(2) + si * si).sqrt(),
            None => self.se_direct[k],
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Writes `beta,g_direct,g_importance,g_avg,gp_direct,gp_importance,gp_avg,ess`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(CSV_COLUMNS)?;
        for k in 0..self.len() {
            writer.write_record([
                format!("{:?}", self.grid[k]),
                format!("{:?}", self.g_direct[k]),
                opt(self.g_importance[k]),
                format!("{:?}", self.g_avg[k]),
                format!("{:?}", self.gp_direct[k]),
                opt(self.gp_importance[k]),
                format!("{:?}", self.gp_avg[k]),
                opt(self.ess[k]),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads a curve written by [`write_csv`](Self::write_csv). Standard
    /// errors are not stored in the file and come back as NaN / missing.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != CSV_COLUMNS {
            return Err(Error::Data { line: 1, message: format!("expected columns {}", CSV_COLUMNS.join(",")) });
        }
        let mut curve = GCurve {
            grid: vec![],
            g_direct: vec![],
            g_importance: vec![],
            g_avg: vec![],
            gp_direct: vec![],
            gp_importance: vec![],
            gp_avg: vec![],
            ess: vec![],
            se_direct: vec![],
            se_importance: vec![],
            sample_count: 0,
            burn_in: 0,
        };
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let parse = |col: usize| -> Result<Option<f64>> {
                let field = record.get(col).unwrap_or("").trim();
                if field.is_empty() {
                    return Ok(None);
                }
                field.parse::<f64>().map(Some).map_err(|_| Error::Data {
                    line,
                    message: format!("column {}: cannot parse {field:?} as a number", CSV_COLUMNS[col]),
                })
            };
            let required = |col: usize| -> Result<f64> {
                parse(col)?.ok_or_else(|| Error::Data {
                    line,
                    message: format!("column {} is empty", CSV_COLUMNS[col]),
                })
            };
            curve.grid.push(required(0)?);
            curve.g_direct.push(required(1)?);
            curve.g_importance.push(parse(2)?);
            curve.g_avg.push(required(3)?);
            curve.gp_direct.push(required(4)?);
            curve.gp_importance.push(parse(5)?);
            curve.gp_avg.push(required(6)?);
            curve.ess.push(parse(7)?);
            curve.se_direct.push(f64::NAN);
            curve.se_importance.push(None);
        }
        if curve.len() < 2 || curve.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "curve needs at least two rows with strictly increasing beta".into(),
            ));
        }
        Ok(curve)
    }
}

const CSV_COLUMNS: [&str; 8] =
    ["beta", "g_direct", "g_importance", "g_avg", "gp_direct", "gp_importance", "gp_avg", "ess"];

/// Interpolates the averaged estimates over `[β_n, β_0]`.
pub fn curve_to_gfunction(curve: &GCurve, mode: Interpolation) -> Result<GFunction> {
    GFunction::interpolated(curve.grid.clone(), curve.g_avg.clone(), curve.gp_avg.clone(), mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyRow {
    pub beta: f64,
    /// `|g_direct − g_importance| / max(|g_avg|, ε)`; `None` without an importance estimate.
    pub gap: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscrepancyOptions {
    pub threshold: f64,
    /// The floor `ε`; defaults to 5% of the largest `|g_avg|` on the grid.
    pub floor: Option<f64>,
}

impl Default for DiscrepancyOptions {
    fn default() -> Self {
        Self { threshold: 0.2, floor: None }
    }
}

/// Relative gaps between direct and importance estimates at each grid point.
pub fn discrepancy_report(curve: &GCurve, options: &DiscrepancyOptions) -> Vec<DiscrepancyRow> {
    let floor = options.floor.unwrap_or_else(|| {
        0.05 * curve.g_avg.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    });
    (0..curve.len())
        .map(|k| {
            let gap = curve.g_importance[k].map(|gi| {
                let diff = (curve.g_direct[k] - gi).abs();
                if diff == 0.0 {
                    0.0
                } else {
                    diff / curve.g_avg[k].abs().max(floor)
                }
            });
            DiscrepancyRow {
                beta: curve.grid[k],
                gap,
                flagged: gap.is_some_and(|g| g > options.threshold),
            }
        })
        .collect()
}
