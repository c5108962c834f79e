use std::sync::Arc;

use crate::error::{Error, Result};
use crate::targets::WitchsHat;

type Curve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How an estimated curve is evaluated between its grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// `g` and `g′` are each interpolated linearly through their node values.
    #[default]
    Linear,
    /// Cubic Hermite through the `(g, g′)` node pairs; `g′` is then the exact
    /// derivative of the interpolated `g`.
    Hermite,
}

/// `g(β) = E_β[h(X)]` and its derivative on a closed domain `[lo, hi]`.
#[derive(Clone)]
pub struct GFunction {
    lo: f64,
    hi: f64,
    g: Curve,
    g_prime: Curve,
    clipped: usize,
}

impl std::fmt::Debug for GFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GFunction")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("clipped", &self.clipped)
            .finish_non_exhaustive()
    }
}

impl GFunction {
    pub fn new(
        lo: f64,
        hi: f64,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { lo, hi, g: Arc::new(g), g_prime: Arc::new(g_prime), clipped: 0 }
    }

    pub fn witchs_hat(target: WitchsHat) -> Self {
        Self::new(0.0, f64::INFINITY, move |b| target.g(b), move |b| target.g_prime(b))
    }

    /// `g(β) = d/(2β)`; the pole at zero is excluded from the domain.
    pub fn gaussian(d: usize) -> Self {
        Self::reciprocal(d as f64 / 2.0, 0.0)
    }

    /// `g(β) = k1/β + k2`, the family for which geometric spacing is optimal.
    pub fn reciprocal(k1: f64, k2: f64) -> Self {
        Self::new(f64::MIN_POSITIVE, f64::INFINITY, move |b| k1 / b + k2, move |b| -k1 / (b * b))
    }

    /// Interpolates tabulated values on a strictly increasing grid.
    ///
    /// Positive derivative values are clipped to zero, since `g` is
    /// non-increasing; the number clipped is available from
    /// [`clipped_derivatives`](Self::clipped_derivatives).
    pub fn interpolated(
        grid: Vec<f64>,
        g: Vec<f64>,
        g_prime: Vec<f64>,
        mode: Interpolation,
    ) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidParameter("interpolation needs at least two nodes".into()));
        }
        if g.len() != grid.len() || g_prime.len() != grid.len() {
            return Err(Error::InvalidParameter("grid and value lengths differ".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
        }
        if g.iter().chain(&g_prime).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite curve value".into()));
        }
        let clipped = g_prime.iter().filter(|&&d| d > 0.0).count();
        let g_prime: Vec<f64> = g_prime.into_iter().map(|d| d.min(0.0)).collect();
        let (lo, hi) = (grid[0], grid[grid.len() - 1]);
        let nodes = Arc::new(Nodes { grid, g, g_prime });
        let (gv, gd): (Curve, Curve) = match mode {
            Interpolation::Linear => {
                let a = nodes.clone();
                let b = nodes;
                (
                    Arc::new(move |x| a.linear(x, &a.g)),
                    Arc::new(move |x| b.linear(x, &b.g_prime)),
                )
            }
            Interpolation::Hermite => {
                let a = nodes.clone();
                let b = nodes;
                (Arc::new(move |x| a.hermite(x).0), Arc::new(move |x| b.hermite(x).1))
            }
        };
        Ok(Self { lo, hi, g: gv, g_prime: gd, clipped })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Number of positive `g′` node values clipped to zero.
    pub fn clipped_derivatives(&self) -> usize {
        self.clipped
    }

    fn check(&self, beta: f64) -> Result<f64> {
        let slack = 1e-12 * self.hi.abs().min(1e12).max(1.0);
        if beta.is_nan() || beta < self.lo - slack || beta > self.hi + slack {
            return Err(Error::OutOfDomain { beta, lo: self.lo, hi: self.hi });
        }
        if beta < self.lo && self.lo > 0.0 && beta <= 0.0 {
            return Err(Error::OutOfDomain { beta, lo: self.lo, hi: self.hi });
        }
        Ok(beta.clamp(self.lo, self.hi))
    }

    pub fn value(&self, beta: f64) -> Result<f64> {
        let beta = self.check(beta)?;
        Ok((self.g)(beta))
    }

    pub fn derivative(&self, beta: f64) -> Result<f64> {
        let beta = self.check(beta)?;
        Ok((self.g_prime)(beta))
    }
}

struct Nodes {
    grid: Vec<f64>,
    g: Vec<f64>,
    g_prime: Vec<f64>,
}

impl Nodes {
    /// Index `k` of the segment `[grid[k], grid[k+1]]` holding `x`.
    fn segment(&self, x: f64) -> usize {
        let k = self.grid.partition_point(|&node| node <= x);
        k.saturating_sub(1).min(self.grid.len() - 2)
    }

    fn linear(&self, x: f64, values: &[f64]) -> f64 {
        let k = self.segment(x);
        let (x0, x1) = (self.grid[k], self.grid[k + 1]);
        let t = (x - x0) / (x1 - x0);
        if t == 0.0 {
            return values[k];
        }
        if t == 1.0 {
            return values[k + 1];
        }
        values[k] + t * (values[k + 1] - values[k])
    }

    fn hermite(&self, x: f64) -> (f64, f64) {
        let k = self.segment(x);
        let (x0, x1) = (self.grid[k], self.grid[k + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.g[k], self.g[k + 1]);
        let (m0, m1) = (self.g_prime[k] * h, self.g_prime[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        let slope = ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / h;
        (value, slope)
    }
}
