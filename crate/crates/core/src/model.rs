//! Tempered target families, temperature ladders and chain states.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse temperatures `β_0 > β_1 > … > β_n ≥ 0`, with `n ≥ 1`.
///
/// `β_0` is the target; `β_n` is the hottest (flattest) level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TemperatureLadder {
    betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LadderViolation {
    /// Fewer than two levels.
    TooShort { len: usize },
    NonFinite { index: usize },
    /// `betas[index] >= betas[index - 1]`.
    NotDecreasing { index: usize },
    Negative { index: usize },
}

impl std::fmt::Display for LadderViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LadderViolation::TooShort { len } => {
                write!(f, "ladder has {len} level(s), at least 2 are required")
            }
            LadderViolation::NonFinite { index } => write!(f, "beta[{index}] is not finite"),
            LadderViolation::NotDecreasing { index } => {
                write!(f, "beta[{index}] does not lie strictly below beta[{}]", index - 1)
            }
            LadderViolation::Negative { index } => write!(f, "beta[{index}] is negative"),
        }
    }
}

/// Reports every broken ladder invariant. An empty list means the ladder is valid.
pub fn validate_ladder(betas: &[f64]) -> std::result::Result<(), Vec<LadderViolation>> {
    let mut violations = Vec::new();
    if betas.len() < 2 {
        violations.push(LadderViolation::TooShort { len: betas.len() });
    }
    for (index, &beta) in betas.iter().enumerate() {
        if !beta.is_finite() {
            violations.push(LadderViolation::NonFinite { index });
            continue;
        }
        if index > 0 && betas[index - 1].is_finite() && beta >= betas[index - 1] {
            violations.push(LadderViolation::NotDecreasing { index });
        }
    }
    if let Some(&last) = betas.last() {
        if last < 0.0 {
            violations.push(LadderViolation::Negative { index: betas.len() - 1 });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

impl TemperatureLadder {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        validate_ladder(&betas).map_err(|v| {
            let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
            Error::InvalidLadder(msgs.join("; "))
        })?;
        Ok(Self { betas })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Number of tempering levels above the target, `n`.
    pub fn n(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.betas[i]
    }

    pub fn target(&self) -> f64 {
        self.betas[0]
    }

    pub fn hottest(&self) -> f64 {
        self.betas[self.n()]
    }

    /// `β_i − β_{i+1}` for `i = 0..n`.
    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.betas.windows(2).map(|w| w[0] - w[1])
    }

    pub fn into_betas(self) -> Vec<f64> {
        self.betas
    }
}

impl TryFrom<Vec<f64>> for TemperatureLadder {
    type Error = Error;

    fn try_from(betas: Vec<f64>) -> Result<Self> {
        Self::new(betas)
    }
}

impl From<TemperatureLadder> for Vec<f64> {
    fn from(ladder: TemperatureLadder) -> Self {
        ladder.betas
    }
}

/// A family of tempered densities `p_β(x) ∝ π(x) exp(−β h(x))`.
///
/// Implementations must be shareable between independently running chains, so
/// all randomness comes in through the `rng` arguments.
pub trait TargetFamily: Sync {
    type State: Clone + Send;

    /// The energy `h(x)`.
    fn energy(&self, state: &Self::State) -> f64;

    /// `log π(x)` up to an additive constant.
    fn log_base(&self, state: &Self::State) -> f64;

    /// One application of a transition kernel that leaves `p_β` invariant.
    fn kernel<R: Rng + ?Sized>(&self, beta: f64, state: &mut Self::State, rng: &mut R);

    /// The time reversal of [`kernel`](Self::kernel), used on the cooling half
    /// of a tempered transition. Reversible kernels need not override this.
    fn reverse_kernel<R: Rng + ?Sized>(&self, beta: f64, state: &mut Self::State, rng: &mut R) {
        self.kernel(beta, state, rng);
    }

    /// A starting state for a chain targeting `p_β`.
    fn initial_state<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Self::State;

    /// An exact independent draw from `p_β`, when one is available.
    fn exact_sample<R: Rng + ?Sized>(&self, _beta: f64, _rng: &mut R) -> Option<Self::State> {
        None
    }

    /// Names of the columns written by [`state_values`](Self::state_values).
    fn state_columns(&self) -> Vec<String>;

    fn state_values(&self, state: &Self::State) -> Vec<f64>;
}

/// A state together with its cached energy.
///
/// The cache is refreshed after every kernel move made through this type, so
/// [`energy`](Self::energy) always agrees with `family.energy(value)`.
#[derive(Debug, Clone)]
pub struct ChainState<S> {
    value: S,
    energy: f64,
}

impl<S: Clone> ChainState<S> {
    pub fn new<F: TargetFamily<State = S>>(family: &F, value: S) -> Self {
        let energy = family.energy(&value);
        Self { value, energy }
    }

    pub fn value(&self) -> &S {
        &self.value
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn into_value(self) -> S {
        self.value
    }

    /// Applies the forward kernel at `beta` and returns the new energy.
    pub fn advance<F, R>(&mut self, family: &F, beta: f64, rng: &mut R) -> f64
    where
        F: TargetFamily<State = S>,
        R: Rng + ?Sized,
    {
        family.kernel(beta, &mut self.value, rng);
        self.energy = family.energy(&self.value);
        self.energy
    }

    /// Applies the reverse kernel at `beta` and returns the new energy.
    pub fn retreat<F, R>(&mut self, family: &F, beta: f64, rng: &mut R) -> f64
    where
        F: TargetFamily<State = S>,
        R: Rng + ?Sized,
    {
        family.reverse_kernel(beta, &mut self.value, rng);
        self.energy = family.energy(&self.value);
        self.energy
    }
}

/// `log π(x) − β h(x)`, the unnormalised log density of `p_β` at `state`.
pub fn log_unnorm_density<F: TargetFamily>(
    family: &F,
    beta: f64,
    state: &ChainState<F::State>,
) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    let energy = state.energy();
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy(energy));
    }
    if beta == 0.0 {
        return Ok(family.log_base(state.value()));
    }
    Ok(family.log_base(state.value()) - beta * energy)
}
