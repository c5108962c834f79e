use rand::Rng;
use serde::{Deserialize, Serialize};

use super::logistic;
use crate::error::{Error, Result};
use crate::model::TargetFamily;

/// The one-dimensional Witch's Hat, `p(x) ∝ 1 + b·I[x ≤ a]` on `[0, 1]`.
///
/// Written in tempered form with `π(x) = 1` and `h(x) = −log(1 + b·I[x ≤ a])`,
/// so that `β = 1` is the target. Every `(1+b)^β` is handled through the
/// log-odds `log(a/(1−a)) + β·log1p(b)` of the peak mass; nothing overflows for
/// `b` in the billions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct WitchsHat {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
}

impl TryFrom<RawParams> for WitchsHat {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        WitchsHat::new(raw.a, raw.b)
    }
}

impl WitchsHat {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!("witch's hat width a={a} must lie in (0,1)")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("witch's hat height b={b} must be >= 0")));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `log(1 + b)`, the depth of the energy well.
    fn depth(&self) -> f64 {
        self.b.ln_1p()
    }

    fn log_odds(&self, beta: f64) -> f64 {
        (self.a / (1.0 - self.a)).ln() + beta * self.depth()
    }

    /// `P_β(X ≤ a) = a(1+b)^β / (a(1+b)^β + 1 − a)`.
    pub fn peak_mass(&self, beta: f64) -> f64 {
        logistic(self.log_odds(beta))
    }

    fn masses(&self, beta: f64) -> (f64, f64) {
        let z = self.log_odds(beta);
        (logistic(z), logistic(-z))
    }

    /// `g(β) = E_β[h(X)]`.
    pub fn g(&self, beta: f64) -> f64 {
        -self.depth() * self.peak_mass(beta)
    }

    /// `g′(β) = −Var_β[h(X)]`.
    pub fn g_prime(&self, beta: f64) -> f64 {
        let (p, q) = self.masses(beta);
        let l = self.depth();
        -l * l * p * q
    }

    pub fn g_double_prime(&self, beta: f64) -> f64 {
        let (p, q) = self.masses(beta);
        let l = self.depth();
        l * l * l * p * q * (p - q)
    }

    pub fn energy_at(&self, x: f64) -> f64 {
        if x <= self.a {
            -self.depth()
        } else {
            0.0
        }
    }

    /// Inverts the piecewise-linear CDF of `p_β` at `u ∈ (0, 1)`.
    pub fn sample(&self, beta: f64, u: f64) -> f64 {
        let (p, q) = self.masses(beta);
        if u < p {
            self.a * u / p
        } else {
            self.a + (1.0 - self.a) * ((u - p) / q).min(1.0)
        }
    }

    /// `E[X]` under the untempered target.
    pub fn theoretical_mean(&self) -> f64 {
        let (a, b) = (self.a, self.b);
        ((1.0 + b) * a * a / 2.0 + (1.0 - a * a) / 2.0) / (1.0 + a * b)
    }

    fn draw<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> f64 {
        // open interval: 0 would still map into [0, a], but keep the contract
        let u = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        };
        self.sample(beta, u)
    }
}

/// Exact inversion sampling at every level, so each kernel call is an
/// independent draw from `p_β`.
impl TargetFamily for WitchsHat {
    type State = f64;

    fn energy(&self, state: &f64) -> f64 {
        self.energy_at(*state)
    }

    fn log_base(&self, _state: &f64) -> f64 {
        0.0
    }

    fn kernel<R: Rng + ?Sized>(&self, beta: f64, state: &mut f64, rng: &mut R) {
        *state = self.draw(beta, rng);
    }

    fn initial_state<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> f64 {
        self.draw(beta, rng)
    }

    fn exact_sample<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Option<f64> {
        Some(self.draw(beta, rng))
    }

    fn state_columns(&self) -> Vec<String> {
        vec!["x".to_string()]
    }

    fn state_values(&self, state: &f64) -> Vec<f64> {
        vec![*state]
    }
}
