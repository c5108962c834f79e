//! Dense BFGS with a backtracking Armijo line search.

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Stop when an iteration reduces `f` by less than this fraction of `|f|`.
    pub function_tolerance: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimises `objective`, which returns `None` outside its feasible set.
pub(crate) fn minimize<F>(objective: F, x0: Vec<f64>, opts: BfgsOptions) -> Option<BfgsOutcome>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let dim = x0.len();
    let (mut f, mut grad) = objective(&x0)?;
    let mut x = x0;
    let outcome = |x: Vec<f64>, f: f64, _g: &[f64], it: usize, ok: bool| BfgsOutcome {
        x,
        f,
        iterations: it,
        converged: ok,
    };
    if dim == 0 || norm(&grad) < opts.gradient_tolerance {
        return Some(outcome(x, f, &grad, 0, true));
    }

    let identity = |h: &mut Vec<Vec<f64>>| {
        for (i, row) in h.iter_mut().enumerate() {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[i] = 1.0;
        }
    };
    let mut h = vec![vec![0.0; dim]; dim];
    identity(&mut h);
    let mut fresh = true;

    for it in 1..=opts.max_iterations {
        let mut dir: Vec<f64> = h.iter().map(|row| -dot(row, &grad)).collect();
        let mut slope = dot(&dir, &grad);
        if !(slope < 0.0) {
            identity(&mut h);
            fresh = true;
            dir = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }

        let mut step = if fresh { (1.0 / norm(&dir)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            if let Some((ft, gt)) = objective(&trial) {
                if ft < f && ft <= f + 1e-4 * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if fresh {
                // steepest descent failed too: nothing left to gain at this precision
                let ok = norm(&grad) < opts.gradient_tolerance;
                return Some(outcome(x, f, &grad, it, ok));
            }
            identity(&mut h);
            fresh = true;
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let reduction = f - f_new;
        x = x_new;
        grad = g_new;
        let f_old = f;
        f = f_new;

        if norm(&grad) < opts.gradient_tolerance {
            return Some(outcome(x, f, &grad, it, true));
        }
        if reduction <= opts.function_tolerance * f_old.abs().max(f.abs()).max(1.0) {
            return Some(outcome(x, f, &grad, it, true));
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if fresh {
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = scale;
                }
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = h.iter().map(|row| dot(row, &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..dim {
                for j in 0..dim {
                    h[i][j] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }
    }
    let ok = norm(&grad) < opts.gradient_tolerance;
    Some(outcome(x, f, &grad, opts.max_iterations, ok))
}
