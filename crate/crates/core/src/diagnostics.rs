//! Acceptance rates, integrated autocorrelation times and run reports.

use std::collections::BTreeMap;
use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::Outcome;

/// Traces shorter than this are rejected by [`iact`].
pub const MIN_TRACE_LEN: usize = 100;

pub fn acceptance_rate<T: Outcome>(records: &[T]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("no sweep records"));
    }
    let accepted = records.iter().filter(|r| r.accepted()).count();
    Ok(accepted as f64 / records.len() as f64)
}

/// Where autocovariances are centred.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Center {
    SampleMean,
    /// A known mean, or a mean shared across a group of chains.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IactEstimate {
    pub tau: f64,
    /// `τ ≤ len/10`.
    pub reliable: bool,
    /// The trace does not vary about its centre; `τ` is reported as 1.
    pub degenerate: bool,
    /// Number of autocorrelation lags summed.
    pub lags: usize,
}

/// Autocovariances `γ_k = (1/N) Σ_t z_t z_{t+k}` for `k = 0..N`, via FFT.
pub fn autocovariances(centered: &[f64]) -> Vec<f64> {
    let n = centered.len();
    if n == 0 {
        return Vec::new();
    }
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = centered.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    buf.iter_mut().for_each(|c| *c = Complex::new(c.norm_sqr(), 0.0));
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// `τ = 1 + 2 Σ_{k=1}^{K} ρ_k`.
///
/// Autocorrelations are summed in consecutive pairs `ρ_{2m−1} + ρ_{2m}`,
/// `m = 1, 2, …`, stopping before the first pair that is not positive.
pub fn iact(trace: &[f64], center: Center) -> Result<IactEstimate> {
    if trace.len() < MIN_TRACE_LEN {
        return Err(Error::InvalidParameter(format!(
            "trace length {} is below the minimum of {MIN_TRACE_LEN}",
            trace.len()
        )));
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("trace contains non-finite values".into()));
    }
    let n = trace.len();
    let c = match center {
        Center::SampleMean => trace.iter().sum::<f64>() / n as f64,
        Center::Fixed(c) => c,
    };
    let z: Vec<f64> = trace.iter().map(|v| v - c).collect();
    let scale = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || scale <= 1e-14 * c.abs() {
        return Ok(IactEstimate { tau: 1.0, reliable: false, degenerate: true, lags: 0 });
    }
    let gamma = autocovariances(&z);
    let var = gamma[0];
    let mut tau = 1.0;
    let mut lags = 0;
    let mut k = 1;
    while k + 1 < n {
        let pair = (gamma[k] + gamma[k + 1]) / var;
        if !(pair > 0.0) {
            break;
        }
        tau += 2.0 * pair;
        lags = k + 1;
        k += 2;
    }
    Ok(IactEstimate { tau, reliable: tau <= n as f64 / 10.0, degenerate: false, lags })
}

/// IACT of each chain in a group, all centred at the grand mean of the group.
///
/// When labels switch freely every chain wanders over the same range and this
/// matches the usual estimate; when they do not, the offset of each chain
/// from the grand mean inflates every autocorrelation.
pub fn group_centered_iact(traces: &[&[f64]]) -> Result<Vec<IactEstimate>> {
    let len = traces.first().map(|t| t.len()).ok_or(Error::Empty("no traces"))?;
    if traces.iter().any(|t| t.len() != len) {
        return Err(Error::InvalidParameter("group traces differ in length".into()));
    }
    let total: f64 = traces.iter().flat_map(|t| t.iter()).sum();
    let grand = total / (len * traces.len()) as f64;
    traces.iter().map(|t| iact(t, Center::Fixed(grand))).collect()
}

/// Standard error of the mean of `trace` from `batches` equal-length batch means.
pub fn batch_means_se(trace: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || trace.len() < batches {
        return Err(Error::InvalidParameter(format!(
            "need at least {batches} >= 2 values for batch means, got {}",
            trace.len()
        )));
    }
    let size = trace.len() / batches;
    let means: Vec<f64> = trace
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok((var / batches as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub n: usize,
    pub ladder: Vec<f64>,
    pub iterations: usize,
    /// Wall-clock seconds by phase.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub acceptance_rate: f64,
    /// IACT estimates per parameter group, one per chain in the group.
    pub iact: BTreeMap<String, Vec<IactEstimate>>,
    pub run_metadata: Option<RunMetadata>,
}

impl DiagnosticsReport {
    /// The `reliable` flag of every estimate, keyed like [`iact`](Self::iact).
    pub fn convergence_flags(&self) -> BTreeMap<String, Vec<bool>> {
        self.iact
            .iter()
            .map(|(group, est)| (group.clone(), est.iter().map(|e| e.reliable).collect()))
            .collect()
    }

    /// Flat `group,chain,tau,reliable` rows.
    pub fn write_iact_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["group", "chain", "tau", "reliable"])?;
        for (group, estimates) in &self.iact {
            for (chain, est) in estimates.iter().enumerate() {
                writer.write_record([
                    group.clone(),
                    (chain + 1).to_string(),
                    format!("{:?}", est.tau),
                    est.reliable.to_string(),
                ])?;
            }
        }
        writer.flush()?;
        Ok(())
    }
}
