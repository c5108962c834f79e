//! Tempered transitions with tuned temperature ladders.
//!
//! The crate is organised around a [`TargetFamily`]: a base measure `π(x)` and an
//! energy `h(x)` defining the tempered densities `p_β(x) ∝ π(x) exp(−β h(x))`.
//! On top of that it provides
//!
//! - [`sampler`]: the up/down tempered-transition proposal and a chain driver,
//! - [`tuning`]: the expected log-rejection objective `S_n`, its gradient and a
//!   minimiser over the interior inverse temperatures,
//! - [`estimation`]: grid estimates of `g(β) = E_β[h(X)]` and `g′(β)` for
//!   targets where they have no closed form,
//! - [`diagnostics`]: acceptance rates and integrated autocorrelation times,
//! - concrete targets: [`targets::WitchsHat`], [`targets::Gaussian`] and the
//!   galaxy-data [`mixture::MixtureFamily`].

pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod mixture;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod targets;
pub mod tuning;

pub use error::{Error, Result};
pub use model::{
    log_unnorm_density, validate_ladder, ChainState, LadderViolation, TargetFamily,
    TemperatureLadder,
};
