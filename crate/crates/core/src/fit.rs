//! Damped Gauss-Newton (Levenberg-Marquardt) least squares with a numerical
//! Jacobian, shared by every curve fit in the crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative parameter-step tolerance.
    pub x_tol: f64,
    /// Relative cost-decrease tolerance.
    pub f_tol: f64,
    /// Gradient infinity-norm tolerance (scaled by cost).
    pub g_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            x_tol: 1e-13,
            f_tol: 1e-20,
            g_tol: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Vec<f64>,
    /// `s² (JᵀJ)⁻¹` with `s² = SSR / (m − n)`.
    pub covariance: DMatrix<f64>,
    pub ssr: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

impl FitOutcome {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = r0.len();
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = 1e-6 * x[k].abs().max(1e-3);
        xp[k] = x[k] + h;
        let rp = f(&xp);
        xp[k] = x[k] - h;
        let rm = f(&xp);
        xp[k] = x[k];
        for i in 0..m {
            j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    j
}

fn covariance(j: &DMatrix<f64>, cost: f64) -> DMatrix<f64> {
    let (m, n) = j.shape();
    let dof = m.saturating_sub(n).max(1) as f64;
    let jtj = j.transpose() * j;
    let inv = jtj
        .clone()
        .try_inverse()
        .unwrap_or_else(|| jtj.pseudo_inverse(1e-300).unwrap_or_else(|_| DMatrix::zeros(n, n)));
    inv * (cost / dof)
}

/// Minimizes `Σ r_i(x)²` from `x0`.
pub fn levenberg_marquardt<F>(residuals: F, x0: &[f64], opts: FitOptions) -> Result<FitOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residuals(&x);
    let m = r.len();
    if m < n {
        return Err(Error::InvalidArgument(format!(
            "{m} residuals cannot determine {n} parameters"
        )));
    }
    let mut cost = ssr(&r);
    if !cost.is_finite() {
        return Err(Error::NonConvergence("non-finite residuals at start".into()));
    }
    let mut lambda = 1e-3;
    let mut j = jacobian(&residuals, &x, &r);
    for iter in 1..=opts.max_iterations {
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        if g.amax() <= opts.g_tol * (1.0 + cost) || cost == 0.0 {
            return Ok(finish(x, j, cost, iter));
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let r_trial = residuals(&trial);
            let c_trial = ssr(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let rel_step = step
                    .iter()
                    .zip(x.iter())
                    .map(|(s, v)| s.abs() / (v.abs() + 1e-12))
                    .fold(0.0, f64::max);
                let rel_drop = (cost - c_trial) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                r = r_trial;
                cost = c_trial;
                lambda = (lambda / 10.0).max(1e-12);
                j = jacobian(&residuals, &x, &r);
                if rel_step < opts.x_tol || rel_drop < opts.f_tol {
                    return Ok(finish(x, j, cost, iter));
                }
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent is possible at any damping: a stationary point.
            return Ok(finish(x, j, cost, iter));
        }
    }
    Err(Error::NonConvergence(format!(
        "no convergence after {} iterations (cost {cost:.3e})",
        opts.max_iterations
    )))
}

fn finish(x: Vec<f64>, j: DMatrix<f64>, cost: f64, iterations: usize) -> FitOutcome {
    let m = j.nrows();
    FitOutcome {
        covariance: covariance(&j, cost),
        params: x,
        ssr: cost,
        residual_rms: (cost / m as f64).sqrt(),
        iterations,
    }
}

/// Runs [`levenberg_marquardt`] from each start and keeps the lowest cost.
pub fn multistart<F>(residuals: F, starts: &[Vec<f64>], opts: FitOptions) -> Result<FitOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut best: Option<FitOutcome> = None;
    let mut last_err = None;
    for s in starts {
        match levenberg_marquardt(&residuals, s, opts) {
            Ok(out) => {
                if best.as_ref().is_none_or(|b| out.ssr < b.ssr) {
                    best = Some(out);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidArgument("no starting points".into())))
}

/// Initial guess for `a cos(2π f t + φ) + b` from a periodogram scan up to
/// the mean-spacing Nyquist frequency. Returns `(f, φ, a, b)`; `t` in μs and
/// `f` in kHz.
pub(crate) fn cosine_guess(data: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    use crate::units::khz_us_phase;
    let n = data.len() as f64;
    let mean = data.iter().map(|d| d.1).sum::<f64>() / n;
    let spread = data.iter().map(|d| (d.1 - mean).abs()).fold(0.0, f64::max);
    let t_max = data.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let t_min = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let span = (t_max - t_min).max(f64::MIN_POSITIVE);
    let nyquist = 0.5 * (n - 1.0) / span * 1e3;
    let bins = (8.0 * n) as usize;
    let project = |f: f64| {
        data.iter().fold((0.0, 0.0), |(re, im), &(t, v)| {
            let ph = khz_us_phase(f, t);
            (re + (v - mean) * ph.cos(), im + (v - mean) * ph.sin())
        })
    };
    let mut best = (0.0, -1.0);
    for b in 0..=bins {
        let f = nyquist * b as f64 / bins as f64;
        let (re, im) = project(f);
        let power = re * re + im * im;
        if power > best.1 {
            best = (f, power);
        }
    }
    let (re, im) = project(best.0);
    (best.0, (-im).atan2(re), spread, mean)
}

/// Maps `(a, φ)` to the equivalent pair with `a ≥ 0` and `φ ∈ (−π, π]`,
/// folding a negative frequency into the phase first.
pub(crate) fn canonical_cosine(f: f64, a: f64, phase: f64) -> (f64, f64, f64) {
    use std::f64::consts::{PI, TAU};
    let (mut f, mut a, mut ph) = (f, a, phase);
    if f < 0.0 {
        f = -f;
        ph = -ph;
    }
    if a < 0.0 {
        a = -a;
        ph += PI;
    }
    ph = ph.rem_euclid(TAU);
    if ph > PI {
        ph -= TAU;
    }
    (f, a, ph)
}
