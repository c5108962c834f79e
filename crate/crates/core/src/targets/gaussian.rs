use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::TargetFamily;

/// The `d`-dimensional Gaussian `N(μ, Σ)` with `h(x) = ½ (x−μ)ᵀ Σ⁻¹ (x−μ)`.
///
/// Level `β` is `N(μ, Σ/β)`, so `g(β) = d/(2β)`. The kernel is a direct draw.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    // lower Cholesky factor of Σ, row-major
    chol: Vec<Vec<f64>>,
}

impl Gaussian {
    pub fn standard(d: usize) -> Result<Self> {
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(vec![0.0; d], cov)
    }

    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter("gaussian dimension must be >= 1".into()));
        }
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParameter(format!("covariance must be {d}x{d}")));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 * (cov[i][j].abs() + cov[j][i].abs()) {
                    return Err(Error::InvalidParameter("covariance is not symmetric".into()));
                }
            }
        }
        let mut chol = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| chol[i][k] * chol[j][k]).sum();
                if i == j {
                    let diag = cov[i][i] - s;
                    if !(diag > 0.0) {
                        return Err(Error::InvalidParameter(
                            "covariance is not positive definite".into(),
                        ));
                    }
                    chol[i][j] = diag.sqrt();
                } else {
                    chol[i][j] = (cov[i][j] - s) / chol[j][j];
                }
            }
        }
        Ok(Self { mean, chol })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn g(&self, beta: f64) -> Result<f64> {
        gaussian_g(self.dim(), beta)
    }

    pub fn g_prime(&self, beta: f64) -> Result<f64> {
        gaussian_g_prime(self.dim(), beta)
    }

    fn draw<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Vec<f64> {
        let scale = beta.recip().sqrt();
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.chol
            .iter()
            .zip(&self.mean)
            .map(|(row, m)| m + scale * row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>())
            .collect()
    }
}

/// `g(β) = d/(2β)` for a `d`-dimensional Gaussian.
pub fn gaussian_g(d: usize, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("gaussian g has a pole at beta={beta}")));
    }
    Ok(d as f64 / (2.0 * beta))
}

pub fn gaussian_g_prime(d: usize, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("gaussian g has a pole at beta={beta}")));
    }
    Ok(-(d as f64) / (2.0 * beta * beta))
}

impl TargetFamily for Gaussian {
    type State = Vec<f64>;

    fn energy(&self, x: &Vec<f64>) -> f64 {
        // forward substitution: L y = x − μ, h = ½|y|²
        let d = self.dim();
        let mut y = vec![0.0; d];
        for i in 0..d {
            let s: f64 = (0..i).map(|k| self.chol[i][k] * y[k]).sum();
            y[i] = (x[i] - self.mean[i] - s) / self.chol[i][i];
        }
        0.5 * y.iter().map(|v| v * v).sum::<f64>()
    }

    fn log_base(&self, _x: &Vec<f64>) -> f64 {
        0.0
    }

    fn kernel<R: Rng + ?Sized>(&self, beta: f64, state: &mut Vec<f64>, rng: &mut R) {
        *state = self.draw(beta, rng);
    }

    fn initial_state<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Vec<f64> {
        self.draw(beta, rng)
    }

    fn exact_sample<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> Option<Vec<f64>> {
        Some(self.draw(beta, rng))
    }

    fn state_columns(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("x_{i}")).collect()
    }

    fn state_values(&self, state: &Vec<f64>) -> Vec<f64> {
        state.clone()
    }
}
