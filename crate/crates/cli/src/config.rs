use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tempered_core::estimation::EstimationConfig;
use tempered_core::mixture::{load_galaxy_data, GalaxyData, MixtureFamily, MixturePrior};
use tempered_core::targets::{Gaussian, WitchsHat};
use tempered_core::tuning::Interpolation;

/// One experiment, as read from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub target: TargetSpec,
    #[serde(default)]
    pub ladder: LadderSpec,
    pub g: Option<GSource>,
    #[serde(default)]
    pub run: RunSpec,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    WitchHat {
        a: f64,
        b: f64,
    },
    Gaussian {
        d: usize,
    },
    Mixture {
        /// Galaxy velocities, one per line; the bundled copy when absent.
        data: Option<PathBuf>,
        #[serde(default)]
        prior: MixturePrior,
        #[serde(default)]
        include_z: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LadderMode {
    Geometric,
    Uniform,
    Tuned,
    Explicit,
    /// No tempering: plain base-kernel moves at `beta0`.
    Vanilla,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSpec {
    pub beta0: f64,
    pub betan: f64,
    pub n: usize,
    pub mode: LadderMode,
    pub betas: Option<Vec<f64>>,
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self { beta0: 1.0, betan: 1.0 / 16.0, n: 4, mode: LadderMode::Geometric, betas: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GSource {
    Analytic {
        #[serde(default)]
        random_starts: u32,
    },
    Estimate {
        #[serde(default = "default_grid")]
        grid_size: usize,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default)]
        interpolation: Interpolation,
        #[serde(default)]
        random_starts: u32,
    },
    Curve {
        path: PathBuf,
        #[serde(default)]
        interpolation: Interpolation,
        #[serde(default)]
        random_starts: u32,
    },
}

fn default_grid() -> usize {
    EstimationConfig::default().grid_size
}

fn default_samples() -> usize {
    EstimationConfig::default().samples
}

fn default_burn_in() -> usize {
    EstimationConfig::default().burn_in
}

impl GSource {
    pub fn random_starts(&self) -> u32 {
        match self {
            GSource::Analytic { random_starts }
            | GSource::Estimate { random_starts, .. }
            | GSource::Curve { random_starts, .. } => *random_starts,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub iterations: usize,
    pub burn_in: usize,
    pub base_moves: usize,
    pub thinning: usize,
    pub replicates: usize,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self { iterations: 10_000, burn_in: 1_000, base_moves: 1, thinning: 1, replicates: 1 }
    }
}

/// A constructed target.
pub enum Target {
    Witch(WitchsHat),
    Gaussian(Gaussian),
    Mixture(MixtureFamily),
}

impl Target {
    pub fn name(&self) -> &'static str {
        match self {
            Target::Witch(_) => "witch-hat",
            Target::Gaussian(_) => "gaussian",
            Target::Mixture(_) => "mixture",
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // relative data and curve paths are taken from the config's directory
        let base = path.parent().unwrap_or(Path::new("."));
        if let TargetSpec::Mixture { data: Some(p), .. } = &mut config.target {
            *p = base.join(&*p);
        }
        if let Some(GSource::Curve { path: p, .. }) = &mut config.g {
            *p = base.join(&*p);
        }
        Ok(config)
    }

    /// Cross-field checks the TOML schema cannot express.
    pub fn validate(&self) -> anyhow::Result<()> {
        let l = &self.ladder;
        match l.mode {
            LadderMode::Tuned if self.g.is_none() => bail!("ladder mode \"tuned\" needs a [g] section"),
            LadderMode::Explicit if l.betas.is_none() => bail!("ladder mode \"explicit\" needs ladder.betas"),
            LadderMode::Geometric | LadderMode::Uniform | LadderMode::Tuned if l.n == 0 => {
                bail!("ladder.n must be at least 1")
            }
            _ => {}
        }
        if l.mode != LadderMode::Explicit && l.mode != LadderMode::Vanilla && !(l.beta0 > l.betan && l.betan > 0.0) {
            bail!("need beta0 > betan > 0, got beta0 = {}, betan = {}", l.beta0, l.betan);
        }
        if matches!(self.g, Some(GSource::Analytic { .. })) && matches!(self.target, TargetSpec::Mixture { .. }) {
            bail!("the mixture target has no analytic g; use source = \"estimate\" or \"curve\"");
        }
        let r = &self.run;
        if r.iterations <= r.burn_in || r.thinning == 0 || r.replicates == 0 {
            bail!("need run.iterations > run.burn_in, run.thinning >= 1 and run.replicates >= 1");
        }
        Ok(())
    }

    pub fn build_target(&self) -> anyhow::Result<Target> {
        Ok(match &self.target {
            TargetSpec::WitchHat { a, b } => Target::Witch(WitchsHat::new(*a, *b)?),
            TargetSpec::Gaussian { d } => Target::Gaussian(Gaussian::standard(*d)?),
            TargetSpec::Mixture { data, prior, include_z } => {
                let data = match data {
                    Some(path) => load_galaxy_data(path).with_context(|| format!("loading {}", path.display()))?,
                    None => GalaxyData::bundled(),
                };
                Target::Mixture(MixtureFamily::new(data, *prior)?.with_labels_in_trace(*include_z))
            }
        })
    }

    pub fn estimation(&self) -> EstimationConfig {
        match &self.g {
            Some(GSource::Estimate { grid_size, samples, burn_in, .. }) => {
                EstimationConfig { grid_size: *grid_size, samples: *samples, burn_in: *burn_in }
            }
            _ => EstimationConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        toml::from_str(text).unwrap()
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse("[target]\nkind = \"witch-hat\"\na = 0.0001\nb = 9500.0\n");
        assert_eq!(c.ladder.n, 4);
        assert_eq!(c.ladder.betan, 1.0 / 16.0);
        assert_eq!(c.run.thinning, 1);
        c.validate().unwrap();
    }

    #[test]
    fn tuned_without_g_is_rejected() {
        let c = parse("[target]\nkind = \"gaussian\"\nd = 3\n[ladder]\nmode = \"tuned\"\n");
        assert!(c.validate().is_err());
    }

    #[test]
    fn analytic_g_needs_analytic_target() {
        let c = parse("[target]\nkind = \"mixture\"\n[g]\nsource = \"analytic\"\n");
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(toml::from_str::<ExperimentConfig>("[target]\nkind = \"gaussian\"\nd = 1\ndim = 2\n").is_err());
    }
}
