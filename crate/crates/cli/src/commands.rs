use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tempered_core::diagnostics::{
    acceptance_rate, group_centered_iact, iact, Center, DiagnosticsReport, IactEstimate, RunMetadata,
};
use tempered_core::estimation::{
    curve_to_gfunction, discrepancy_report, estimate_grid, DiscrepancyOptions, GCurve,
};
use tempered_core::rng::{stream, Purpose};
use tempered_core::sampler::{read_trace_csv, run_base_chain, run_chain, write_trace_csv, ChainRun, RunConfig, RunSummary};
use tempered_core::tuning::{
    default_starts, geometric_ladder, minimize_s_n, s_n, uniform_ladder, GFunction, TuningOptions,
    TuningResult,
};
use tempered_core::{TargetFamily, TemperatureLadder};

use crate::config::{ExperimentConfig, GSource, LadderMode, Target};
use crate::report::sig6;

macro_rules! with_family {
    ($target:expr, $f:ident => $body:expr) => {
        match $target {
            Target::Witch($f) => $body,
            Target::Gaussian($f) => $body,
            Target::Mixture($f) => $body,
        }
    };
}

/// Wall-clock seconds per stage. Kept apart from the deterministic outputs.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Timings(pub BTreeMap<String, f64>);

impl Timings {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let started = Instant::now();
        let out = f();
        *self.0.entry(stage.to_string()).or_insert(0.0) += started.elapsed().as_secs_f64();
        out
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    std::io::Write::write_all(&mut out, b"\n")?;
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn estimate_curve(config: &ExperimentConfig, target: &Target) -> anyhow::Result<GCurve> {
    let l = &config.ladder;
    let est = config.estimation();
    Ok(with_family!(target, f => estimate_grid(f, l.beta0, l.betan, &est, config.seed)?))
}

/// The `g` curve named by the `[g]` section, if any. Also returns the
/// estimated curve when one was computed.
fn resolve_g(
    config: &ExperimentConfig,
    target: &Target,
    timings: &mut Timings,
) -> anyhow::Result<Option<(GFunction, Option<GCurve>)>> {
    let Some(source) = &config.g else { return Ok(None) };
    Ok(Some(match source {
        GSource::Analytic { .. } => match target {
            Target::Witch(w) => (GFunction::witchs_hat(*w), None),
            Target::Gaussian(g) => (GFunction::gaussian(g.dim()), None),
            Target::Mixture(_) => bail!("the mixture target has no analytic g"),
        },
        GSource::Estimate { interpolation, .. } => {
            let curve = timings.time("estimate_g", || estimate_curve(config, target))?;
            (curve_to_gfunction(&curve, *interpolation)?, Some(curve))
        }
        GSource::Curve { path, interpolation, .. } => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let curve = GCurve::read_csv(file).with_context(|| format!("reading {}", path.display()))?;
            (curve_to_gfunction(&curve, *interpolation)?, Some(curve))
        }
    }))
}

struct Resolved {
    /// `None` in vanilla mode.
    ladder: Option<TemperatureLadder>,
    g: Option<GFunction>,
    curve: Option<GCurve>,
    tuning: Option<TuningResult>,
}

fn resolve_ladder(config: &ExperimentConfig, target: &Target, timings: &mut Timings) -> anyhow::Result<Resolved> {
    let l = &config.ladder;
    let (g, curve) = match resolve_g(config, target, timings)? {
        Some((g, curve)) => (Some(g), curve),
        None => (None, None),
    };
    let mut tuning = None;
    let ladder = match l.mode {
        LadderMode::Geometric => Some(geometric_ladder(l.beta0, l.betan, l.n)?),
        LadderMode::Uniform => Some(uniform_ladder(l.beta0, l.betan, l.n)?),
        LadderMode::Explicit => Some(TemperatureLadder::new(l.betas.clone().unwrap_or_default())?),
        LadderMode::Vanilla => None,
        LadderMode::Tuned => {
            let g = g.as_ref().context("ladder mode \"tuned\" needs a [g] section")?;
            let opts = TuningOptions {
                random_starts: config.g.as_ref().map_or(0, GSource::random_starts),
                seed: config.seed,
                ..TuningOptions::default()
            };
            let result =
                timings.time("optimise", || minimize_s_n(g, l.beta0, l.betan, l.n, &default_starts(l.betan, &opts), &opts))?;
            let ladder = result.ladder.clone();
            tuning = Some(result);
            Some(ladder)
        }
    };
    Ok(Resolved { ladder, g, curve, tuning })
}

#[derive(Debug, Serialize)]
struct TuningReport {
    target: &'static str,
    mode: LadderMode,
    beta0: f64,
    betan: f64,
    n: usize,
    ladder: Option<Vec<f64>>,
    /// S_n of the geometric, uniform and selected ladders, when `g` is known.
    s_n: BTreeMap<String, f64>,
    tuning: Option<TuningResult>,
}

pub fn tune(config: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    let target = config.build_target()?;
    let mut timings = Timings::default();
    let resolved = resolve_ladder(config, &target, &mut timings)?;
    let l = &config.ladder;
    let mut table = BTreeMap::new();
    if let Some(g) = &resolved.g {
        if l.mode != LadderMode::Vanilla {
            // compare against ladders with the same endpoints and size as the selected one
            let (n, b0, bn) = match &resolved.ladder {
                Some(lad) => (lad.n(), lad.target(), lad.hottest()),
                None => (l.n, l.beta0, l.betan),
            };
            table.insert("geometric".to_string(), s_n(&geometric_ladder(b0, bn, n)?, g)?);
            table.insert("uniform".to_string(), s_n(&uniform_ladder(b0, bn, n)?, g)?);
            if let Some(ladder) = &resolved.ladder {
                table.insert("selected".to_string(), s_n(ladder, g)?);
            }
        }
    }
    println!("target {}, mode {}, n = {}", target.name(), format!("{:?}", l.mode).to_lowercase(), resolved.ladder.as_ref().map_or(0, |x| x.n()));
    if table.is_empty() {
        println!("S_n not available without a [g] section");
    } else {
        println!("{:>10} {:>12}", "ladder", "S_n");
        for (name, v) in &table {
            println!("{name:>10} {:>12}", sig6(*v));
        }
    }
    if let Some(ladder) = &resolved.ladder {
        println!("betas: {}", ladder.betas().iter().map(|b| sig6(*b)).collect::<Vec<_>>().join(" "));
    }
    let report = TuningReport {
        target: target.name(),
        mode: l.mode,
        beta0: l.beta0,
        betan: l.betan,
        n: resolved.ladder.as_ref().map_or(0, |x| x.n()),
        ladder: resolved.ladder.map(TemperatureLadder::into_betas),
        s_n: table,
        tuning: resolved.tuning,
    };
    write_json(&out.join("tuning.json"), &report)?;
    if let Some(curve) = &resolved.curve {
        curve.write_csv(create(&out.join("g_curve.csv"))?)?;
    }
    write_json(&out.join("timings.json"), &timings)
}

pub fn estimate_g(config: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    let target = config.build_target()?;
    let mut timings = Timings::default();
    let curve = timings.time("estimate_g", || estimate_curve(config, &target))?;
    let rows = discrepancy_report(&curve, &DiscrepancyOptions::default());
    println!("{:>10} {:>12} {:>12} {:>12} {:>10}", "beta", "g_avg", "g'_avg", "ess", "flag");
    for (k, row) in rows.iter().enumerate() {
        println!(
            "{:>10} {:>12} {:>12} {:>12} {:>10}",
            sig6(curve.grid[k]),
            sig6(curve.g_avg[k]),
            sig6(curve.gp_avg[k]),
            curve.ess[k].map_or("-".to_string(), sig6),
            if row.flagged { "DISAGREE" } else { "" }
        );
    }
    let flagged = rows.iter().filter(|r| r.flagged).count();
    println!("{flagged} of {} grid points flagged", rows.len());
    curve.write_csv(create(&out.join("g_curve.csv"))?)?;
    write_json(&out.join("discrepancy.json"), &rows)?;
    write_json(&out.join("timings.json"), &timings)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleSummary {
    pub target: String,
    pub seed: u64,
    pub mode: LadderMode,
    /// Empty for vanilla runs.
    pub ladder: Vec<f64>,
    pub replicates: Vec<RunSummary>,
    pub pooled_acceptance_rate: f64,
}

fn run_replicate(
    config: &ExperimentConfig,
    target: &Target,
    ladder: Option<&TemperatureLadder>,
    replicate: usize,
) -> anyhow::Result<ChainRun> {
    let r = &config.run;
    let mut rng = stream(config.seed, Purpose::Chain, replicate as u32);
    Ok(with_family!(target, f => {
        let init = f.initial_state(config.ladder.beta0, &mut rng);
        match ladder {
            Some(ladder) => {
                let mut rc = RunConfig::new(ladder.clone(), r.iterations);
                rc.burn_in = r.burn_in;
                rc.base_moves_per_temper = r.base_moves;
                rc.trace_thinning = r.thinning;
                rc.seed = config.seed;
                run_chain(f, &rc, init, &mut rng)?
            }
            None => run_base_chain(f, config.ladder.beta0, r.iterations, r.burn_in, r.thinning, init, &mut rng)?,
        }
    }))
}

fn trace_name(replicate: usize, replicates: usize) -> String {
    if replicates == 1 {
        "trace.csv".to_string()
    } else {
        format!("trace_{}.csv", replicate + 1)
    }
}

pub fn sample(config: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    let target = config.build_target()?;
    let mut timings = Timings::default();
    let resolved = resolve_ladder(config, &target, &mut timings)?;
    let reps = config.run.replicates;
    let started = Instant::now();
    let runs: Vec<ChainRun> = (0..reps)
        .into_par_iter()
        .map(|k| run_replicate(config, &target, resolved.ladder.as_ref(), k))
        .collect::<anyhow::Result<_>>()?;
    timings.0.insert("sampling".to_string(), started.elapsed().as_secs_f64());
    let total: f64 = timings.0.values().sum();
    timings.0.insert("total".to_string(), total);

    for (k, run) in runs.iter().enumerate() {
        write_trace_csv(run, create(&out.join(trace_name(k, reps)))?)?;
        println!(
            "replicate {}: accepted {} of {} ({}), failures {}",
            k + 1,
            run.summary.accepted,
            run.summary.iterations,
            sig6(run.summary.acceptance_rate),
            run.summary.failures
        );
    }
    let accepted: usize = runs.iter().map(|r| r.summary.accepted).sum();
    let iterations: usize = runs.iter().map(|r| r.summary.iterations).sum();
    let summary = SampleSummary {
        target: target.name().to_string(),
        seed: config.seed,
        mode: config.ladder.mode,
        ladder: resolved.ladder.map(TemperatureLadder::into_betas).unwrap_or_default(),
        replicates: runs.into_iter().map(|r| r.summary).collect(),
        pooled_acceptance_rate: accepted as f64 / iterations as f64,
    };
    if let Some(curve) = &resolved.curve {
        curve.write_csv(create(&out.join("g_curve.csv"))?)?;
    }
    let tuning_share = (timings.0.get("estimate_g").unwrap_or(&0.0) + timings.0.get("optimise").unwrap_or(&0.0)) / total;
    println!("pooled acceptance {}; tuning share of wall time {}", sig6(summary.pooled_acceptance_rate), sig6(tuning_share));
    write_json(&out.join("summary.json"), &summary)?;
    write_json(&out.join("timings.json"), &timings)
}

fn chain_wise(series: &[f64]) -> anyhow::Result<IactEstimate> {
    Ok(iact(series, Center::SampleMean)?)
}

fn column<'a>(table: &'a tempered_core::sampler::TraceTable, name: &str) -> anyhow::Result<&'a [f64]> {
    table.column(name).with_context(|| format!("trace has no column {name}"))
}

pub fn analyze(config: &ExperimentConfig, trace: Option<PathBuf>, out: &Path) -> anyhow::Result<()> {
    let target = config.build_target()?;
    let path = trace.unwrap_or_else(|| out.join("trace.csv"));
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let table = read_trace_csv(file).with_context(|| format!("reading {}", path.display()))?;
    let mut groups: BTreeMap<String, Vec<IactEstimate>> = BTreeMap::new();
    match &target {
        Target::Witch(w) => {
            groups.insert("x".into(), vec![iact(column(&table, "x")?, Center::Fixed(w.theoretical_mean()))?]);
        }
        Target::Gaussian(_) => {
            let estimates = table.series.iter().map(|s| chain_wise(s)).collect::<anyhow::Result<_>>()?;
            groups.insert("x".into(), estimates);
        }
        Target::Mixture(_) => {
            // non-switching chains show up as unreliable group-centred estimates
            for name in ["w", "mu", "sigma2"] {
                let series: Vec<&[f64]> =
                    (1..=3).map(|j| column(&table, &format!("{name}_{j}"))).collect::<anyhow::Result<_>>()?;
                groups.insert(name.to_string(), group_centered_iact(&series)?);
                let per_chain = series.iter().map(|s| chain_wise(s)).collect::<anyhow::Result<_>>()?;
                groups.insert(format!("{name}_chainwise"), per_chain);
            }
        }
    }
    let run_metadata = read_metadata(&path, &table);
    let report = DiagnosticsReport { acceptance_rate: acceptance_rate(&table.accepted)?, iact: groups, run_metadata };

    println!("acceptance rate {}", sig6(report.acceptance_rate));
    for (group, estimates) in &report.iact {
        let cells: Vec<String> = estimates
            .iter()
            .map(|e| {
                let flag = if e.degenerate {
                    " (degenerate)"
                } else if !e.reliable {
                    " (unreliable)"
                } else {
                    ""
                };
                format!("{}{flag}", sig6(e.tau))
            })
            .collect();
        println!("tau[{group}]: {}", cells.join(", "));
    }
    write_json(&out.join("report.json"), &report)?;
    report.write_iact_csv(create(&out.join("iact.csv"))?)?;
    Ok(())
}

/// Run metadata from `summary.json` and `timings.json` next to the trace, when present.
fn read_metadata(trace: &Path, table: &tempered_core::sampler::TraceTable) -> Option<RunMetadata> {
    let dir = trace.parent()?;
    let summary: SampleSummary = serde_json::from_reader(File::open(dir.join("summary.json")).ok()?).ok()?;
    let timings: Timings = File::open(dir.join("timings.json"))
        .ok()
        .and_then(|f| serde_json::from_reader(f).ok())
        .unwrap_or_default();
    Some(RunMetadata {
        seed: summary.seed,
        n: summary.ladder.len().saturating_sub(1),
        ladder: summary.ladder,
        iterations: summary.replicates.first().map_or(table.accepted.len(), |r| r.iterations),
        timings: timings.0,
    })
}
