//! Longitudinal relaxation of the electron spin triplet.
//!
//! Populations are ordered `(m_S = +1, 0, −1)`, rates are in s⁻¹ and times in
//! ms.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{canonical_cosine, cosine_guess, levenberg_marquardt, FitOptions};
use crate::units::{khz_us_phase, rate_ms};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateMatrix {
    /// `m_S = +1 ↔ 0`, s⁻¹.
    pub gamma_p1: f64,
    /// `m_S = −1 ↔ 0`, s⁻¹.
    pub gamma_m1: f64,
    /// `m_S = +1 ↔ −1`, s⁻¹.
    pub gamma_2: f64,
}

impl Default for RateMatrix {
    fn default() -> Self {
        Self {
            gamma_p1: 98.0,
            gamma_m1: 100.0,
            gamma_2: 130.0,
        }
    }
}

impl RateMatrix {
    pub fn new(gamma_p1: f64, gamma_m1: f64, gamma_2: f64) -> Result<Self> {
        let r = Self {
            gamma_p1,
            gamma_m1,
            gamma_2,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.gamma_p1, self.gamma_m1, self.gamma_2] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "relaxation rates must be finite and non-negative, got {self:?}"
                )));
            }
        }
        Ok(())
    }

    /// Symmetric generator with zero column sums.
    pub fn matrix(&self) -> Matrix3<f64> {
        let (a, b, g) = (self.gamma_p1, self.gamma_m1, self.gamma_2);
        Matrix3::new(
            -a - g, a, g, //
            a, -a - b, b, //
            g, b, -b - g,
        )
    }

    pub fn sum(&self) -> f64 {
        self.gamma_p1 + self.gamma_m1 + self.gamma_2
    }

    /// `√(a² + b² + g² − ab − ag − bg)`.
    pub fn x0(&self) -> f64 {
        let (a, b, g) = (self.gamma_p1, self.gamma_m1, self.gamma_2);
        (a * a + b * b + g * g - a * b - a * g - b * g).max(0.0).sqrt()
    }

    /// `λ = 0, −Σγ + x0, −Σγ − x0`, s⁻¹.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let (s, x0) = (self.sum(), self.x0());
        [0.0, -s + x0, -s - x0]
    }
}

/// Spin projection labels in population order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "-1")]
    Minus,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Plus, Level::Zero, Level::Minus];

    pub fn index(self) -> usize {
        match self {
            Level::Plus => 0,
            Level::Zero => 1,
            Level::Minus => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "+1" | "1" | "p1" | "plus" => Ok(Level::Plus),
            "0" | "zero" => Ok(Level::Zero),
            "-1" | "m1" | "minus" => Ok(Level::Minus),
            other => Err(Error::Parse(format!("unknown spin level '{other}'"))),
        }
    }
}

/// Orthogonal eigenvectors paired with their eigenvalues.
fn eigensystem(rates: &RateMatrix) -> [(f64, Vector3<f64>); 3] {
    let (a, b, g) = (rates.gamma_p1, rates.gamma_m1, rates.gamma_2);
    let x0 = rates.x0();
    let s = rates.sum();
    let ones = Vector3::new(1.0, 1.0, 1.0);
    let gamma = rates.matrix();

    let closed_form = [
        Vector3::new(a * b + g * x0 - g * g, a * g + b * x0 - b * b, (g - x0) * (b - x0) - a * a),
        Vector3::new(a * b - g * x0 - g * g, a * g - b * x0 - b * b, (g + x0) * (b + x0) - a * a),
    ];
    let scale = s * s;
    let usable = closed_form.iter().all(|v| v.norm() > 1e-6 * scale)
        && (closed_form[0].normalize().dot(&closed_form[1].normalize())).abs() < 1e-8;
    let pair = if usable {
        closed_form
    } else {
        // Restrict Γ to the plane orthogonal to (1,1,1) and diagonalize the
        // 2×2 block with one Jacobi rotation.
        let u = Vector3::new(1.0, -1.0, 0.0) / 2f64.sqrt();
        let w = Vector3::new(1.0, 1.0, -2.0) / 6f64.sqrt();
        let (huu, hww, huw) = (u.dot(&(gamma * u)), w.dot(&(gamma * w)), u.dot(&(gamma * w)));
        let theta = 0.5 * (2.0 * huw).atan2(huu - hww);
        let (c, sn) = (theta.cos(), theta.sin());
        [u * c + w * sn, w * c - u * sn]
    };
    // Pair each vector with its Rayleigh quotient rather than trusting labels.
    let lam = |v: &Vector3<f64>| v.dot(&(gamma * v)) / v.norm_squared();
    [(0.0, ones), (lam(&pair[0]), pair[0]), (lam(&pair[1]), pair[1])]
}

/// Populations at `t_ms` after preparing `initial`.
pub fn analytic_populations(rates: &RateMatrix, t_ms: f64, initial: Level) -> [f64; 3] {
    let j = initial.index();
    let x0 = rates.x0();
    if x0 < 1e-9 * rates.sum() {
        // All rates equal: every non-uniform mode decays at 3γ.
        let gamma = rates.sum() / 3.0;
        let decay = (-3.0 * rate_ms(gamma, t_ms)).exp();
        let mut p = [(1.0 - decay) / 3.0; 3];
        p[j] += decay;
        return p;
    }
    let mut p = [0.0; 3];
    for (lambda, v) in eigensystem(rates) {
        let coeff = v[j] / v.norm_squared() * (rate_ms(lambda, t_ms)).exp();
        for (k, pk) in p.iter_mut().enumerate() {
            *pk += coeff * v[k];
        }
    }
    p
}

/// `((γ₊₁ + γ₂)/2 + γ₋₁)·T` for `T` in ns.
pub fn t1_gate_error(rates: &RateMatrix, t_gate_ns: f64) -> f64 {
    ((rates.gamma_p1 + rates.gamma_2) / 2.0 + rates.gamma_m1) * t_gate_ns * 1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationCurve {
    pub initial: Level,
    pub readout: Level,
    /// `(t_ms, population)`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub rates: RateMatrix,
    /// Covariance of `(γ₊₁, γ₋₁, γ₂)`, s⁻².
    pub covariance: [[f64; 3]; 3],
    pub std_errors: [f64; 3],
    /// Rates pinned at zero because the unconstrained optimum was negative.
    pub clamped: [bool; 3],
    /// Per-curve `(amplitude, baseline)` in `Level::ALL × Level::ALL` order.
    pub nuisance: Option<Vec<(f64, f64)>>,
    pub residual_rms: f64,
}

/// Joint least-squares fit of all nine initial/readout curves.
pub fn fit_rate_matrix(curves: &[PopulationCurve], with_nuisance: bool) -> Result<RateFit> {
    let mut ordered: Vec<&PopulationCurve> = Vec::with_capacity(9);
    for init in Level::ALL {
        for read in Level::ALL {
            let c = curves
                .iter()
                .find(|c| c.initial == init && c.readout == read)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("missing curve for initial {init:?}, readout {read:?}"))
                })?;
            ordered.push(c);
        }
    }

    // Start: fit the decay of the prepared-state population to one exponential.
    let guess = initial_rate_guess(&ordered);
    let mut clamped = [false; 3];
    let mut out = None;
    for _ in 0..4 {
        let free: Vec<usize> = (0..3).filter(|&k| !clamped[k]).collect();
        let n_free = free.len();
        let unpack = |q: &[f64]| -> ([f64; 3], Vec<(f64, f64)>) {
            let mut r = [0.0; 3];
            for (i, &k) in free.iter().enumerate() {
                r[k] = q[i];
            }
            let nuis = if with_nuisance {
                (0..9).map(|c| (q[n_free + 2 * c], q[n_free + 2 * c + 1])).collect()
            } else {
                vec![(1.0, 0.0); 9]
            };
            (r, nuis)
        };
        let residuals = |q: &[f64]| -> Vec<f64> {
            let (r, nuis) = unpack(q);
            let rates = RateMatrix {
                gamma_p1: r[0],
                gamma_m1: r[1],
                gamma_2: r[2],
            };
            let mut res = Vec::new();
            for (c, curve) in ordered.iter().enumerate() {
                let (amp, base) = nuis[c];
                for &(t, v) in &curve.points {
                    let p = analytic_populations(&rates, t, curve.initial)[curve.readout.index()];
                    res.push(amp * p + base - v);
                }
            }
            res
        };
        let mut x0: Vec<f64> = free.iter().map(|&k| guess[k]).collect();
        if with_nuisance {
            for _ in 0..9 {
                x0.extend([1.0, 0.0]);
            }
        }
        let fit = levenberg_marquardt(residuals, &x0, FitOptions::default())?;
        let (r, nuis) = unpack(&fit.params);
        let negative: Vec<usize> = free.iter().copied().filter(|&k| r[k] < 0.0).collect();
        if negative.is_empty() {
            out = Some((fit, r, nuis, free));
            break;
        }
        for k in negative {
            clamped[k] = true;
        }
    }
    let (fit, r, nuis, free) =
        out.ok_or_else(|| Error::NonConvergence("rate fit kept producing negative rates".into()))?;
    let mut covariance = [[0.0; 3]; 3];
    for (i, &ki) in free.iter().enumerate() {
        for (j, &kj) in free.iter().enumerate() {
            covariance[ki][kj] = fit.covariance[(i, j)];
        }
    }
    let std_errors = [0, 1, 2].map(|k| covariance[k][k].max(0.0).sqrt());
    Ok(RateFit {
        rates: RateMatrix {
            gamma_p1: r[0],
            gamma_m1: r[1],
            gamma_2: r[2],
        },
        covariance,
        std_errors,
        clamped,
        nuisance: with_nuisance.then_some(nuis),
        residual_rms: fit.residual_rms,
    })
}

fn initial_rate_guess(ordered: &[&PopulationCurve]) -> [f64; 3] {
    // Prepared-state population decays to 1/3 roughly as exp(−(γ_a + γ_b) t).
    let mut total = [0.0; 3];
    for (i, init) in Level::ALL.iter().enumerate() {
        let curve = ordered[i * 3 + i];
        let (mut num, mut den) = (0.0, 0.0);
        for &(t, v) in &curve.points {
            let excess = (v - 1.0 / 3.0) / (2.0 / 3.0);
            if t > 0.0 && excess > 0.05 && excess < 0.99 {
                num += t * 1e-3 * (-excess.ln());
                den += (t * 1e-3).powi(2);
            }
        }
        total[init.index()] = if den > 0.0 { num / den } else { 100.0 };
    }
    // total_+1 ≈ γ₊₁ + γ₂, total_0 ≈ γ₊₁ + γ₋₁, total_−1 ≈ γ₋₁ + γ₂.
    let half = (total[0] + total[1] + total[2]) / 2.0;
    [
        (half - total[2]).max(1.0),
        (half - total[0]).max(1.0),
        (half - total[1]).max(1.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiInstabilityFit {
    /// Relative standard deviation of the drive amplitude.
    pub rel_sigma: f64,
    /// Gaussian decay constant, μs; infinite for an undamped signal.
    pub t2_prime: f64,
    /// Fitted (possibly aliased) oscillation frequency, kHz.
    pub delta_f: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

impl RabiInstabilityFit {
    pub fn undamped(&self) -> bool {
        self.t2_prime.is_infinite()
    }
}

const RABI_MIN_POINTS: usize = 20;

/// Fits `a cos(2π δf t + φ) exp(−(t/T2′)²) + b` and converts the decay into a
/// relative amplitude spread.
///
/// A drive amplitude `f(1 + g)` with `g ~ N(0, s²)` averages the oscillation
/// to `cos(2πft)·exp(−(2πfst)²/2)`, so `s = 1/(√2 π f T2′)`. `f_rabi_khz` is
/// the true Rabi frequency; it defaults to the fitted `δf`, which differs
/// when the data are undersampled.
pub fn fit_rabi_instability(data: &[(f64, f64)], f_rabi_khz: Option<f64>) -> Result<RabiInstabilityFit> {
    if data.len() < RABI_MIN_POINTS {
        return Err(Error::InvalidArgument(format!(
            "need at least {RABI_MIN_POINTS} points, got {}",
            data.len()
        )));
    }
    let (f0, ph0, a0, b0) = cosine_guess(data);
    if a0 < 1e-12 {
        return Err(Error::Degenerate("Rabi signal has no oscillation".into()));
    }
    let t_max = data.iter().map(|d| d.0).fold(0.0, f64::max);
    // Decay parametrized by u = 1/T2′ so the undamped limit u = 0 is regular.
    let model = |q: &[f64], t: f64| {
        q[2] * (khz_us_phase(q[0], t) + q[3]).cos() * (-(q[1] * t).powi(2)).exp() + q[4]
    };
    let residuals = |q: &[f64]| -> Vec<f64> { data.iter().map(|&(t, v)| model(q, t) - v).collect() };
    let mut best: Option<crate::fit::FitOutcome> = None;
    for u in [0.5 / t_max, 1.0 / t_max, 3.0 / t_max] {
        if let Ok(out) = levenberg_marquardt(residuals, &[f0, u, a0, ph0, b0], FitOptions::default()) {
            if best.as_ref().is_none_or(|b| out.ssr < b.ssr) {
                best = Some(out);
            }
        }
    }
    let out = best.ok_or_else(|| Error::NonConvergence("Rabi fit failed from every start".into()))?;
    let (df, amp, phase) = canonical_cosine(out.params[0], out.params[2], out.params[3]);
    let u = out.params[1].abs();
    // Decay below resolution over the record counts as undamped.
    let undamped = u * t_max < 1e-6;
    let t2_prime = if undamped { f64::INFINITY } else { 1.0 / u };
    let f = f_rabi_khz.unwrap_or(df);
    let rel_sigma = if undamped {
        0.0
    } else {
        // t in μs and f in kHz: 2πf t carries a factor 1e-3.
        1.0 / (std::f64::consts::SQRT_2 * std::f64::consts::PI * f * 1e-3 * t2_prime)
    };
    Ok(RabiInstabilityFit {
        rel_sigma,
        t2_prime,
        delta_f: df,
        amplitude: amp,
        phase,
        offset: out.params[4],
        residual_rms: out.residual_rms,
    })
}
