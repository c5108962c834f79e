//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

/// Adaptive Simpson quadrature of `f` over `[lo, hi]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, lo, hi, fa, fm, fb, whole, tol, 40)
}

/// Witch's Hat energy written out from the density `1 + b·I[x ≤ a]`.
pub fn witch_h(a: f64, b: f64, x: f64) -> f64 {
    -(1.0 + if x <= a { b } else { 0.0 }).ln()
}

/// `(E_β[h], −Var_β[h])` for the Witch's Hat by quadrature, split at `a`.
///
/// The tempered density is scaled by `(1+b)^{−β}` so the integrands stay
/// bounded for very large `b`.
pub fn witch_moments(a: f64, b: f64, beta: f64) -> (f64, f64) {
    let scale = beta * b.ln_1p();
    let dens = |x: f64| (-beta * witch_h(a, b, x) - scale).exp();
    let moment = |k: i32| {
        let f = |x: f64| dens(x) * witch_h(a, b, x).powi(k);
        // the outer piece starts just past `a` so its endpoint sees the flat branch
        simpson(&f, 0.0, a, 1e-13) + simpson(&f, a * (1.0 + 1e-15), 1.0, 1e-13)
    };
    let (z, m1, m2) = (moment(0), moment(1), moment(2));
    let g = m1 / z;
    (g, -(m2 / z - g * g))
}

/// Probability mass of `[0, a]` under the untempered Witch's Hat.
pub fn witch_peak_probability(a: f64, b: f64) -> f64 {
    a * (1.0 + b) / (1.0 + a * b)
}

/// KL divergence between zero-mean normals with the given variances.
pub fn normal_kl(var_p: f64, var_q: f64) -> f64 {
    0.5 * ((var_q / var_p).ln() + var_p / var_q - 1.0)
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// `S_n` summed directly from its definition with an arbitrary `g`.
pub fn s_n_direct(betas: &[f64], g: &dyn Fn(f64) -> f64) -> f64 {
    betas.windows(2).map(|w| (w[0] - w[1]) * (g(w[1]) - g(w[0]))).sum()
}

pub const CONVEX: (f64, f64) = (0.5, 7.5e8);
pub const CONCAVE: (f64, f64) = (1e-4, 9.5e3);
pub const BETA_N: f64 = 1.0 / 16.0;
