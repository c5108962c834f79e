//! Tempered-transition proposals and the chain driver.
//!
//! A sweep from `x_0 = x` applies `T_1, …, T_n` (heating) and then
//! `T′_n, …, T′_1` (cooling), where `T_i` targets `p_i`. The proposal `x′_0`
//! is accepted with probability `min{1, exp(−(F′ − F))}`, where
//!
//! ```text
//! F  = Σ_{i<n} (β_i − β_{i+1}) h(x_i)    x_i  is the state before T_{i+1}
//! F′ = Σ_{i<n} (β_i − β_{i+1}) h(x′_i)   x′_i is the state after T′_{i+1}
//! ```

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChainState, TargetFamily, TemperatureLadder};

/// Everything recorded about one tempered transition.
#[derive(Debug, Clone)]
pub struct SweepRecord<S> {
    /// `h(x_0), …, h(x_{n−1})`.
    pub up_energies: Vec<f64>,
    /// `h(x′_0), …, h(x′_{n−1})`, indexed by level rather than visiting order.
    pub down_energies: Vec<f64>,
    pub f: f64,
    pub f_prime: f64,
    pub accepted: bool,
    /// The sweep produced a non-finite energy and was abandoned.
    pub failed: bool,
    /// `x′_0`, absent when the sweep failed.
    pub proposal_endpoint: Option<S>,
}

/// The part of a [`SweepRecord`] kept for every iteration of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub f: f64,
    pub f_prime: f64,
    pub accepted: bool,
    pub failed: bool,
}

impl<S> SweepRecord<S> {
    pub fn summary(&self) -> SweepSummary {
        SweepSummary { f: self.f, f_prime: self.f_prime, accepted: self.accepted, failed: self.failed }
    }
}

/// Anything that records whether a proposal was accepted.
pub trait Outcome {
    fn accepted(&self) -> bool;
}

impl Outcome for SweepSummary {
    fn accepted(&self) -> bool {
        self.accepted
    }
}

impl<S> Outcome for SweepRecord<S> {
    fn accepted(&self) -> bool {
        self.accepted
    }
}

impl Outcome for bool {
    fn accepted(&self) -> bool {
        *self
    }
}

/// `min{1, exp(−(F′ − F))}`.
pub fn acceptance_probability(f: f64, f_prime: f64) -> f64 {
    let delta = f_prime - f;
    if delta <= 0.0 {
        1.0
    } else {
        (-delta).exp()
    }
}

/// One tempered transition from `state`, accepted or rejected in place.
///
/// Exactly one uniform deviate is drawn for the accept decision of a sweep
/// that completes. A sweep that meets a non-finite energy is abandoned and
/// counts as a rejection.
pub fn tempered_sweep<F, R>(
    state: &mut ChainState<F::State>,
    ladder: &TemperatureLadder,
    family: &F,
    rng: &mut R,
) -> SweepRecord<F::State>
where
    F: TargetFamily,
    R: Rng + ?Sized,
{
    let n = ladder.n();
    let betas = ladder.betas();
    let mut up_energies = Vec::with_capacity(n);
    let mut down_energies = vec![0.0; n];
    let mut f = 0.0;
    let mut f_prime = 0.0;
    let failed = |up: Vec<f64>, down: Vec<f64>, f, f_prime| SweepRecord {
        up_energies: up,
        down_energies: down,
        f,
        f_prime,
        accepted: false,
        failed: true,
        proposal_endpoint: None,
    };

    let mut work = state.clone();
    for i in 0..n {
        let h = work.energy();
        if !h.is_finite() {
            return failed(up_energies, down_energies, f64::NAN, f64::NAN);
        }
        up_energies.push(h);
        f += (betas[i] - betas[i + 1]) * h;
        work.advance(family, betas[i + 1], rng);
    }
    for i in (0..n).rev() {
        let h = work.retreat(family, betas[i + 1], rng);
        if !h.is_finite() {
            return failed(up_energies, down_energies, f, f64::NAN);
        }
        down_energies[i] = h;
        f_prime += (betas[i] - betas[i + 1]) * h;
    }

    let u: f64 = rng.random();
    let delta = f_prime - f;
    let accepted = delta <= 0.0 || u.ln() < -delta;
    let proposal_endpoint = Some(work.value().clone());
    if accepted {
        *state = work;
    }
    SweepRecord {
        up_energies,
        down_energies,
        f,
        f_prime,
        accepted,
        failed: false,
        proposal_endpoint,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub ladder: TemperatureLadder,
    pub iterations: usize,
    pub burn_in: usize,
    /// Base-level kernel applications before each tempered transition.
    pub base_moves_per_temper: usize,
    pub seed: u64,
    pub trace_thinning: usize,
}

impl RunConfig {
    pub fn new(ladder: TemperatureLadder, iterations: usize) -> Self {
        Self { ladder, iterations, burn_in: 0, base_moves_per_temper: 1, seed: 0, trace_thinning: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.trace_thinning == 0 {
            return Err(Error::InvalidParameter("trace thinning must be >= 1".into()));
        }
        Ok(())
    }

    fn records(&self, iteration: usize) -> bool {
        iteration >= self.burn_in && (iteration - self.burn_in).is_multiple_of(self.trace_thinning)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub accepted: bool,
    pub f: f64,
    pub f_prime: f64,
    pub energy: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub burn_in: usize,
    pub n: usize,
    pub accepted: usize,
    pub accepted_after_burn_in: usize,
    pub failures: usize,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub columns: Vec<String>,
    pub trace: Vec<TraceRow>,
    pub sweeps: Vec<SweepSummary>,
    pub summary: RunSummary,
    pub wall_time_secs: f64,
}

/// Runs a tempered-transitions chain from `initial`.
///
/// Each iteration applies `base_moves_per_temper` base-level kernels at `β_0`
/// and then one tempered transition. Acceptance counts cover every iteration,
/// burn-in included; the trace keeps thinned post-burn-in states.
pub fn run_chain<F, R>(
    family: &F,
    config: &RunConfig,
    initial: F::State,
    rng: &mut R,
) -> Result<ChainRun>
where
    F: TargetFamily,
    R: Rng + ?Sized,
{
    config.validate()?;
    let started = Instant::now();
    let ladder = &config.ladder;
    let mut state = ChainState::new(family, initial);
    if !state.energy().is_finite() {
        return Err(Error::NonFiniteEnergy(state.energy()));
    }
    let mut sweeps = Vec::with_capacity(config.iterations);
    let mut trace = Vec::new();
    let (mut accepted, mut accepted_after, mut failures) = (0, 0, 0);

    for iteration in 0..config.iterations {
        for _ in 0..config.base_moves_per_temper {
            let previous = state.clone();
            if !state.advance(family, ladder.target(), rng).is_finite() {
                state = previous;
                failures += 1;
            }
        }
        let record = tempered_sweep(&mut state, ladder, family, rng);
        if record.accepted {
            accepted += 1;
            if iteration >= config.burn_in {
                accepted_after += 1;
            }
        }
        failures += record.failed as usize;
        let summary = record.summary();
        sweeps.push(summary);
        if config.records(iteration) {
            trace.push(TraceRow {
                iteration,
                accepted: summary.accepted,
                f: summary.f,
                f_prime: summary.f_prime,
                energy: state.energy(),
                values: family.state_values(state.value()),
            });
        }
    }

    Ok(ChainRun {
        columns: family.state_columns(),
        trace,
        sweeps,
        summary: RunSummary {
            iterations: config.iterations,
            burn_in: config.burn_in,
            n: ladder.n(),
            accepted,
            accepted_after_burn_in: accepted_after,
            failures,
            acceptance_rate: accepted as f64 / config.iterations as f64,
        },
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

/// A plain chain of base-level kernel moves at a single `beta`, no tempering.
pub fn run_base_chain<F, R>(
    family: &F,
    beta: f64,
    iterations: usize,
    burn_in: usize,
    thinning: usize,
    initial: F::State,
    rng: &mut R,
) -> Result<ChainRun>
where
    F: TargetFamily,
    R: Rng + ?Sized,
{
    if iterations <= burn_in || thinning == 0 {
        return Err(Error::InvalidParameter("need iterations > burn-in and thinning >= 1".into()));
    }
    let started = Instant::now();
    let mut state = ChainState::new(family, initial);
    let mut trace = Vec::new();
    let mut failures = 0;
    for iteration in 0..iterations {
        let previous = state.clone();
        if !state.advance(family, beta, rng).is_finite() {
            state = previous;
            failures += 1;
        }
        if iteration >= burn_in && (iteration - burn_in).is_multiple_of(thinning) {
            trace.push(TraceRow {
                iteration,
                accepted: false,
                f: f64::NAN,
                f_prime: f64::NAN,
                energy: state.energy(),
                values: family.state_values(state.value()),
            });
        }
    }
    Ok(ChainRun {
        columns: family.state_columns(),
        trace,
        sweeps: Vec::new(),
        summary: RunSummary {
            iterations,
            burn_in,
            n: 0,
            accepted: 0,
            accepted_after_burn_in: 0,
            failures,
            acceptance_rate: 0.0,
        },
        wall_time_secs: started.elapsed().as_secs_f64(),
    })
}

fn csv_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        String::new()
    }
}

/// Writes the trace as CSV: `iteration,accepted,F,F_prime,<state columns>`.
/// Floats use round-trip precision; non-finite values are left empty.
pub fn write_trace_csv<W: Write>(run: &ChainRun, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["iteration".to_string(), "accepted".into(), "F".into(), "F_prime".into()];
    header.extend(run.columns.iter().cloned());
    writer.write_record(&header)?;
    for row in &run.trace {
        let mut record = vec![
            row.iteration.to_string(),
            (row.accepted as u8).to_string(),
            csv_float(row.f),
            csv_float(row.f_prime),
        ];
        record.extend(row.values.iter().map(|&v| csv_float(v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// A trace read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub columns: Vec<String>,
    pub accepted: Vec<bool>,
    /// One vector per state column.
    pub series: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|i| self.series[i].as_slice())
    }
}

pub fn read_trace_csv<R: std::io::Read>(input: R) -> Result<TraceTable> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    let expected = ["iteration", "accepted", "F", "F_prime"];
    if header.len() < expected.len() || header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(Error::Data { line: 1, message: "unexpected trace header".into() });
    }
    let columns: Vec<String> = header.iter().skip(4).map(String::from).collect();
    let mut accepted = Vec::new();
    let mut series = vec![Vec::new(); columns.len()];
    for (row, record) in reader.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::Data { line, message: e.to_string() })?;
        if record.len() != header.len() {
            return Err(Error::Data { line, message: "wrong number of fields".into() });
        }
        accepted.push(match &record[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Data { line, message: format!("bad accepted flag {other:?}") })
            }
        });
        for (k, field) in record.iter().skip(4).enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Data { line, message: format!("bad number {field:?}") })?;
            series[k].push(v);
        }
    }
    Ok(TraceTable { columns, accepted, series })
}
