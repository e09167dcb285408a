//! Damped Gauss–Newton (Levenberg–Marquardt) least squares for small problems.

/// Residuals `r(p)` with analytic Jacobian `∂r_i/∂p_j` (row-major, m × n).
pub trait LmProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, p: &[f64], r: &mut [f64]);
    fn jacobian(&self, p: &[f64], j: &mut [f64]);
    /// Maps a trial point back into the feasible region.
    fn project(&self, _p: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub lambda0: f64,
    pub lambda_factor: f64,
    pub max_iter: usize,
    /// Relative step size below which iteration stops.
    pub xtol: f64,
    /// Convergence requires `‖Jᵀr‖∞ ≤ gtol · (1 + cost)`.
    pub gtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { lambda0: 1e-3, lambda_factor: 3.0, max_iter: 200, xtol: 1e-10, gtol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// `½ Σ r²`.
    pub cost: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `JᵀJ` at the returned point, row-major n × n.
    pub jtj: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Solves `A x = b` for a small dense system by partial-pivot elimination.
pub(crate) fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs()))?;
        if m[piv * n + c].abs() <= 1e-300 {
            return None;
        }
        if piv != c {
            for k in 0..n {
                m.swap(c * n + k, piv * n + k);
            }
            x.swap(c, piv);
        }
        for r in c + 1..n {
            let f = m[r * n + c] / m[c * n + c];
            if f != 0.0 {
                for k in c..n {
                    m[r * n + k] -= f * m[c * n + k];
                }
                x[r] -= f * x[c];
            }
        }
    }
    for c in (0..n).rev() {
        let mut s = x[c];
        for k in c + 1..n {
            s -= m[c * n + k] * x[k];
        }
        x[c] = s / m[c * n + c];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Inverse of a symmetric positive matrix with its reciprocal condition estimate
/// after Jacobi scaling. `None` when numerically singular.
pub(crate) fn inverse_spd(a: &[f64], n: usize) -> Option<(Vec<f64>, f64)> {
    let d: Vec<f64> = (0..n).map(|i| a[i * n + i].max(0.0).sqrt()).collect();
    if d.iter().any(|&v| v == 0.0 || !v.is_finite()) {
        return None;
    }
    let scaled: Vec<f64> = (0..n * n).map(|k| a[k] / (d[k / n] * d[k % n])).collect();
    let mut inv = vec![0.0; n * n];
    for c in 0..n {
        let e: Vec<f64> = (0..n).map(|i| if i == c { 1.0 } else { 0.0 }).collect();
        let col = solve(&scaled, &e, n)?;
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    let norm = |m: &[f64]| (0..n).map(|r| (0..n).map(|c| m[r * n + c].abs()).sum::<f64>()).fold(0.0, f64::max);
    let rcond = 1.0 / (norm(&scaled) * norm(&inv));
    let out = (0..n * n).map(|k| inv[k] / (d[k / n] * d[k % n])).collect();
    Some((out, rcond))
}

fn normal_equations(j: &[f64], r: &[f64], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; n * n];
    let mut g = vec![0.0; n];
    for i in 0..m {
        let row = &j[i * n..(i + 1) * n];
        for a in 0..n {
            g[a] += row[a] * r[i];
            for b in a..n {
                jtj[a * n + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..n {
        for b in 0..a {
            jtj[a * n + b] = jtj[b * n + a];
        }
    }
    (jtj, g)
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

pub fn levenberg_marquardt<P: LmProblem + ?Sized>(problem: &P, start: &[f64], opts: &LmOptions) -> LmOutcome {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let mut p = start.to_vec();
    problem.project(&mut p);
    let mut r = vec![0.0; m];
    let mut jac = vec![0.0; m * n];
    problem.residuals(&p, &mut r);
    let mut cost = cost_of(&r);
    let mut lambda = opts.lambda0;
    let mut iterations = 0;
    let mut trial_r = vec![0.0; m];

    problem.jacobian(&p, &mut jac);
    let (mut jtj, mut g) = normal_equations(&jac, &r, m, n);
    let gnorm = |g: &[f64]| g.iter().fold(0.0f64, |s, v| s.max(v.abs()));

    while iterations < opts.max_iter {
        if gnorm(&g) <= opts.gtol * (1.0 + cost) {
            break;
        }
        iterations += 1;
        let dmax = (0..n).map(|i| jtj[i * n + i]).fold(0.0f64, f64::max);
        let floor = 1e-12 * dmax.max(1e-300);
        let mut stalled = false;
        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[i * n + i] += lambda * jtj[i * n + i].max(floor);
            }
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let accepted = match solve(&a, &neg, n) {
                Some(delta) => {
                    let mut trial: Vec<f64> = p.iter().zip(&delta).map(|(x, d)| x + d).collect();
                    problem.project(&mut trial);
                    problem.residuals(&trial, &mut trial_r);
                    let c = cost_of(&trial_r);
                    if c.is_finite() && c < cost {
                        let step = trial.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        let size = p.iter().fold(0.0f64, |s, v| s.max(v.abs()));
                        stalled = step <= opts.xtol * (size + opts.xtol);
                        p = trial;
                        std::mem::swap(&mut r, &mut trial_r);
                        cost = c;
                        true
                    } else {
                        false
                    }
                }
                None => false,
            };
            if accepted {
                lambda = (lambda / opts.lambda_factor).max(1e-15);
                break;
            }
            lambda *= opts.lambda_factor;
            if lambda > 1e16 {
                stalled = true;
                break;
            }
        }
        problem.jacobian(&p, &mut jac);
        (jtj, g) = normal_equations(&jac, &r, m, n);
        if stalled {
            break;
        }
    }
    let gradient_norm = gnorm(&g);
    LmOutcome {
        converged: gradient_norm <= opts.gtol * (1.0 + cost),
        params: p,
        cost,
        gradient_norm,
        iterations,
        jtj,
        residuals: r,
    }
}
