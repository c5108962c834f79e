//! Target families whose `g(β)` has a closed form.

mod gaussian;
mod witch;

pub use gaussian::{gaussian_g, gaussian_g_prime, Gaussian};
pub use witch::WitchsHat;

/// `1 / (1 + exp(−z))` without overflow for large `|z|`.
pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
