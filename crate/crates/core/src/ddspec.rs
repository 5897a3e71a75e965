//! Dynamical-decoupling spectroscopy of individual carbon spins.
//!
//! Times are in μs and frequencies in kHz. The sequence is CPMG-timed:
//! `τ/2 − π − τ − π − … − π − τ/2` with ideal instantaneous π pulses.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fit::{canonical_cosine, cosine_guess, multistart, FitOptions};
use crate::model::CarbonSpin;
use crate::qcore::{c, expm_hermitian, spin_operators, trace, CMatrix};
use crate::units::khz_us_phase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DDSequence {
    n_pulses: usize,
    tau: f64,
}

impl DDSequence {
    pub fn new(n_pulses: usize, tau_us: f64) -> Result<Self> {
        if n_pulses == 0 || !n_pulses.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "pulse count must be even and positive, got {n_pulses}"
            )));
        }
        if !(tau_us > 0.0) || !tau_us.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau_us}")));
        }
        Ok(Self {
            n_pulses,
            tau: tau_us,
        })
    }

    pub fn n_pulses(&self) -> usize {
        self.n_pulses
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Electron manifold paired with `m_S = 0` during spectroscopy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Manifold {
    /// `m_S = +1`: the coupling enters with a positive sign.
    #[default]
    Plus,
    /// `m_S = −1`.
    Minus,
}

impl Manifold {
    fn sign(self) -> f64 {
        match self {
            Manifold::Plus => 1.0,
            Manifold::Minus => -1.0,
        }
    }
}

/// Nuclear precession frequencies conditioned on the electron state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalFrequencies {
    /// `|ω_C|`, kHz.
    pub omega0: f64,
    /// Precession frequency in the coupled manifold, kHz.
    pub omega1: f64,
    /// Cosine of the angle between the two precession axes.
    pub n0_dot_n1: f64,
}

fn field_vectors(spin: &CarbonSpin, omega_c: f64, manifold: Manifold) -> ([f64; 3], [f64; 3]) {
    let s = manifold.sign();
    (
        [0.0, 0.0, omega_c],
        [s * spin.a_zx(), s * spin.a_zy(), omega_c + s * spin.a_zz],
    )
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn conditional_frequencies_in(spin: &CarbonSpin, omega_c: f64, manifold: Manifold) -> ConditionalFrequencies {
    let (b0, b1) = field_vectors(spin, omega_c, manifold);
    let (w0, w1) = (norm3(&b0), norm3(&b1));
    let dot = if w0 == 0.0 || w1 == 0.0 {
        // A vanishing field has no axis; the free evolution is the identity
        // in that branch, so any axis gives the same dynamics.
        1.0
    } else {
        (b0[2] * b1[2]) / (w0 * w1)
    };
    ConditionalFrequencies {
        omega0: w0,
        omega1: w1,
        n0_dot_n1: dot,
    }
}

pub fn conditional_frequencies(spin: &CarbonSpin, omega_c: f64) -> ConditionalFrequencies {
    conditional_frequencies_in(spin, omega_c, Manifold::Plus)
}

/// `sin²(Nφ/2) / cos²(φ/2)` as a polynomial in `cos φ`, free of the removable
/// singularity at `cos(φ/2) = 0`.
///
/// With `M = N/2`, `sin(Mφ) = sin φ · U_{M−1}(cos φ)` (Chebyshev, second kind),
/// so the ratio equals `2 (1 − cos φ) U_{M−1}(cos φ)²`.
fn dd_ratio(n_pulses: usize, cos_phi: f64) -> f64 {
    let x = cos_phi.clamp(-1.0, 1.0);
    let m = n_pulses / 2;
    // U_0 = 1, U_1 = 2x, U_{k+1} = 2x U_k − U_{k−1}.
    let (mut u_prev, mut u) = (0.0, 1.0);
    for _ in 1..m {
        let next = 2.0 * x * u - u_prev;
        u_prev = u;
        u = next;
    }
    2.0 * (1.0 - x) * u * u
}

pub fn dd_coherence_analytic_in(spin: &CarbonSpin, seq: &DDSequence, omega_c: f64, manifold: Manifold) -> f64 {
    let f = conditional_frequencies_in(spin, omega_c, manifold);
    let dot = f.n0_dot_n1;
    let a0 = khz_us_phase(f.omega0, seq.tau);
    let a1 = khz_us_phase(f.omega1, seq.tau);
    let cos_phi = (a0 / 2.0).cos() * (a1 / 2.0).cos() - dot * (a0 / 2.0).sin() * (a1 / 2.0).sin();
    let prefactor = 2.0 * (1.0 - dot * dot) * (a0 / 4.0).sin().powi(2) * (a1 / 4.0).sin().powi(2);
    1.0 - prefactor * dd_ratio(seq.n_pulses, cos_phi)
}

/// Closed-form electron coherence under the DD sequence for one carbon.
pub fn dd_coherence_analytic(spin: &CarbonSpin, seq: &DDSequence, omega_c: f64) -> f64 {
    dd_coherence_analytic_in(spin, seq, omega_c, Manifold::Plus)
}

fn nuclear_generator(b: &[f64; 3]) -> CMatrix {
    let s = spin_operators(0.5).expect("spin 1/2 is supported");
    (s.sx.scale(b[0]) + s.sy.scale(b[1]) + s.sz.scale(b[2])).scale(TAU * 1e-3)
}

/// Joint nuclear generators `(H_0, H_1)` of all carbons for the two electron
/// branches, in rad/μs.
fn joint_generators(spins: &[CarbonSpin], omega_c: f64, manifold: Manifold) -> (CMatrix, CMatrix) {
    let dim = 1usize << spins.len();
    let mut h0 = CMatrix::zeros(dim, dim);
    let mut h1 = CMatrix::zeros(dim, dim);
    for (i, spin) in spins.iter().enumerate() {
        let (b0, b1) = field_vectors(spin, omega_c, manifold);
        let left = CMatrix::identity(1 << i, 1 << i);
        let right = CMatrix::identity(dim >> (i + 1), dim >> (i + 1));
        h0 += left.kronecker(&nuclear_generator(&b0)).kronecker(&right);
        h1 += left.kronecker(&nuclear_generator(&b1)).kronecker(&right);
    }
    (h0, h1)
}

/// Nuclear propagators of the two electron branches over the full sequence.
fn branch_propagators(spins: &[CarbonSpin], seq: &DDSequence, omega_c: f64, manifold: Manifold) -> (CMatrix, CMatrix) {
    let (h0, h1) = joint_generators(spins, omega_c, manifold);
    let (half0, half1) = (expm_hermitian(&h0, seq.tau / 2.0), expm_hermitian(&h1, seq.tau / 2.0));
    let (full0, full1) = (expm_hermitian(&h0, seq.tau), expm_hermitian(&h1, seq.tau));
    // Branch A starts in m_S = 0, branch B in the coupled manifold.
    let mut ua = half0.clone();
    let mut ub = half1.clone();
    for k in 1..seq.n_pulses {
        let a_in_zero = k % 2 == 0;
        ua = if a_in_zero { &full0 * ua } else { &full1 * ua };
        ub = if a_in_zero { &full1 * ub } else { &full0 * ub };
    }
    // After an even number of flips each branch ends where it started.
    ua = &half0 * ua;
    ub = &half1 * ub;
    (ua, ub)
}

fn branch_overlap(spins: &[CarbonSpin], seq: &DDSequence, omega_c: f64, manifold: Manifold) -> f64 {
    let (ua, ub) = branch_propagators(spins, seq, omega_c, manifold);
    // 2|⟨σ+⟩| for a maximally mixed bath is Tr(U_B† U_A)/d; the trace is real
    // because both branch generators are traceless.
    let d = ua.nrows() as f64;
    let overlap: Complex64 = trace(&(ub.adjoint() * ua)) / c(d, 0.0);
    overlap.re
}

pub fn dd_coherence_oracle_in(spin: &CarbonSpin, seq: &DDSequence, omega_c: f64, manifold: Manifold) -> f64 {
    branch_overlap(std::slice::from_ref(spin), seq, omega_c, manifold)
}

/// Direct propagation of the two electron branches with a maximally mixed
/// nucleus; independent of the closed form.
pub fn dd_coherence_oracle(spin: &CarbonSpin, seq: &DDSequence, omega_c: f64) -> f64 {
    dd_coherence_oracle_in(spin, seq, omega_c, Manifold::Plus)
}

/// Brute-force coherence for several carbons evolved jointly.
pub fn dd_coherence_oracle_joint(spins: &[CarbonSpin], seq: &DDSequence, omega_c: f64) -> f64 {
    branch_overlap(spins, seq, omega_c, Manifold::Plus)
}

/// Interval of the `k`-th resonance, μs.
pub fn resonance_interval(spin: &CarbonSpin, omega_c: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("resonance order starts at 1".into()));
    }
    let f = conditional_frequencies(spin, omega_c);
    let sum = f.omega0 + f.omega1;
    if sum == 0.0 {
        return Err(Error::Degenerate("both precession frequencies vanish".into()));
    }
    Ok((2 * k - 1) as f64 / sum * 1e3)
}

/// Independent-spin product of single-carbon coherences.
pub fn multi_spin_coherence(spins: &[CarbonSpin], seq: &DDSequence, omega_c: f64) -> f64 {
    spins
        .iter()
        .map(|s| dd_coherence_analytic(s, seq, omega_c))
        .product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarbonFitResult {
    pub a_zz: f64,
    pub a_perp: f64,
    /// Row-major 2×2 covariance of `(a_zz, a_perp)`, kHz².
    pub covariance: [[f64; 2]; 2],
    pub residual_rms: f64,
}

impl CarbonFitResult {
    pub fn std_errors(&self) -> (f64, f64) {
        (self.covariance[0][0].sqrt(), self.covariance[1][1].sqrt())
    }
}

const FIT_MIN_POINTS_DIP: usize = 8;

/// Least-squares estimate of `(a_zz, a_perp)` from DD coherence data.
///
/// Starting points are the initial guess plus, for every listed resonance
/// order, the couplings that place that order's dip at the deepest data point.
pub fn fit_carbon_dip(
    data: &[(f64, f64)],
    n_pulses: usize,
    k_orders: &[usize],
    omega_c: f64,
    initial_guess: (f64, f64),
) -> Result<CarbonFitResult> {
    if data.len() < FIT_MIN_POINTS_DIP {
        return Err(Error::InvalidArgument(format!(
            "need at least {FIT_MIN_POINTS_DIP} points, got {}",
            data.len()
        )));
    }
    let seqs: Vec<DDSequence> = data
        .iter()
        .map(|&(tau, _)| DDSequence::new(n_pulses, tau))
        .collect::<Result<_>>()?;
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-6 {
        return Err(Error::Degenerate("coherence data show no dip".into()));
    }

    let model = |p: &[f64], seq: &DDSequence| {
        let spin = CarbonSpin {
            a_zz: p[0],
            a_perp: p[1].abs(),
            phi: 0.0,
        };
        dd_coherence_analytic(&spin, seq, omega_c)
    };
    let residuals = |p: &[f64]| -> Vec<f64> {
        data.iter()
            .zip(&seqs)
            .map(|(&(_, v), seq)| model(p, seq) - v)
            .collect()
    };

    let mut starts = vec![vec![initial_guess.0, initial_guess.1]];
    let tau_min = data
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|d| d.0)
        .expect("nonempty data");
    for &k in k_orders {
        if k == 0 {
            return Err(Error::InvalidArgument("resonance order starts at 1".into()));
        }
        // τ_k (f0 + f1) = 2k − 1, and f1 ≈ |ω_C + a_zz|.
        let f1 = (2 * k - 1) as f64 / tau_min * 1e3 - omega_c.abs();
        for cand in [f1 - omega_c, -f1 - omega_c] {
            for perp in [initial_guess.1.abs().max(1.0), 10.0, 40.0] {
                starts.push(vec![cand, perp]);
            }
        }
    }
    let out = multistart(residuals, &starts, FitOptions::default())?;
    let mut cov = [[0.0; 2]; 2];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = out.covariance[(i, j)];
        }
    }
    if out.params[1] < 0.0 {
        cov[0][1] = -cov[0][1];
        cov[1][0] = -cov[1][0];
    }
    Ok(CarbonFitResult {
        a_zz: out.params[0],
        a_perp: out.params[1].abs(),
        covariance: cov,
        residual_rms: out.residual_rms,
    })
}

/// Parameters of `a cos(2π δf t + φ0) exp(−(t/T2*)^p) + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyFit {
    /// kHz.
    pub delta_f: f64,
    /// μs.
    pub t2_star: f64,
    pub p: f64,
    pub amplitude: f64,
    /// rad, in `(−π, π]`.
    pub phase: f64,
    pub offset: f64,
    pub residual_rms: f64,
}

pub fn ramsey_model(t_us: f64, delta_f: f64, t2_star: f64, p: f64, amplitude: f64, phase: f64, offset: f64) -> f64 {
    amplitude * (khz_us_phase(delta_f, t_us) + phase).cos() * (-(t_us / t2_star).abs().powf(p)).exp() + offset
}

const FIT_MIN_POINTS_RAMSEY: usize = 10;

/// Least-squares Ramsey fit; `fixed_p` pins the decay exponent.
pub fn fit_ramsey(data: &[(f64, f64)], fixed_p: Option<f64>) -> Result<RamseyFit> {
    if data.len() < FIT_MIN_POINTS_RAMSEY {
        return Err(Error::InvalidArgument(format!(
            "need at least {FIT_MIN_POINTS_RAMSEY} points, got {}",
            data.len()
        )));
    }
    let (f_guess, phase_guess, amp_guess, mean) = cosine_guess(data);
    if amp_guess < 1e-9 {
        return Err(Error::Degenerate("Ramsey signal has no oscillation".into()));
    }
    let t_max = data.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let t_min = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let span = (t_max - t_min).max(f64::MIN_POSITIVE);

    let p_values: Vec<f64> = match fixed_p {
        Some(p) => vec![p],
        None => vec![1.0, 2.0],
    };
    let t2_values = [span / 4.0, span / 2.0, span];
    let mut starts = Vec::new();
    for &p in &p_values {
        for &t2 in &t2_values {
            let mut s = vec![f_guess, t2, amp_guess, phase_guess, mean];
            if fixed_p.is_none() {
                s.push(p);
            }
            starts.push(s);
        }
    }
    let unpack = |q: &[f64]| -> (f64, f64, f64, f64, f64, f64) {
        let p = fixed_p.unwrap_or_else(|| q[5]);
        (q[0], q[1], p, q[2], q[3], q[4])
    };
    let residuals = |q: &[f64]| -> Vec<f64> {
        let (df, t2, p, a, ph, b) = unpack(q);
        data.iter()
            .map(|&(t, v)| ramsey_model(t, df, t2, p, a, ph, b) - v)
            .collect()
    };
    let out = multistart(residuals, &starts, FitOptions::default())?;
    let (df, t2, p, a, ph, b) = unpack(&out.params);
    let (df, a, ph) = canonical_cosine(df, a, ph);
    Ok(RamseyFit {
        delta_f: df,
        t2_star: t2.abs(),
        p,
        amplitude: a,
        phase: ph,
        offset: b,
        residual_rms: out.residual_rms,
    })
}

/// Gaussian static-noise envelope `exp(−(2π σ t)²/2)`, σ in kHz, t in μs.
pub fn static_envelope(sigma: f64, t_us: f64) -> f64 {
    (-0.5 * khz_us_phase(sigma, t_us).powi(2)).exp()
}

const FIT_MIN_POINTS_STATIC: usize = 5;

/// One-parameter fit of the static-noise envelope, σ in kHz.
pub fn fit_static_sigma(data: &[(f64, f64)]) -> Result<f64> {
    if data.len() < FIT_MIN_POINTS_STATIC {
        return Err(Error::InvalidArgument(format!(
            "need at least {FIT_MIN_POINTS_STATIC} points, got {}",
            data.len()
        )));
    }
    // Log-linear estimate: −2 ln C = (2π σ t)².
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, v) in data {
        if v > 0.02 && v < 1.0 {
            let x = khz_us_phase(1.0, t).powi(2);
            num += x * (-2.0 * v.ln());
            den += x * x;
        }
    }
    if den == 0.0 {
        if data.iter().all(|&(_, v)| v >= 1.0) {
            return Ok(0.0);
        }
        den = 1.0;
    }
    let guess = (num / den).max(0.0).sqrt();
    let residuals = |q: &[f64]| -> Vec<f64> {
        data.iter()
            .map(|&(t, v)| static_envelope(q[0], t) - v)
            .collect()
    };
    let starts: Vec<Vec<f64>> = [guess, guess * 0.5, guess * 2.0, 1.0]
        .iter()
        .map(|&g| vec![g.max(1e-6)])
        .collect();
    let out = multistart(residuals, &starts, FitOptions::default())?;
    let sigma = out.params[0].abs();
    // The envelope is flat at σ = 0; snap when the data cannot tell apart.
    let flat: f64 = data.iter().map(|&(_, v)| (1.0 - v).powi(2)).sum();
    if flat <= out.ssr {
        return Ok(0.0);
    }
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    const OMEGA_C: f64 = -546.67;

    fn spin(a_zz: f64, a_perp: f64) -> CarbonSpin {
        CarbonSpin::new(a_zz, a_perp, 0.4).unwrap()
    }

    #[test]
    fn conditional_frequency_examples() {
        let f = conditional_frequencies(&spin(0.0, 0.0), OMEGA_C);
        assert_eq!((f.omega0, f.omega1, f.n0_dot_n1), (546.67, 546.67, 1.0));
        let f = conditional_frequencies(&spin(100.0, 0.0), OMEGA_C);
        assert_eq!(f.n0_dot_n1.abs(), 1.0);
        let f = conditional_frequencies(&spin(100.0, 50.0), OMEGA_C);
        assert!((f.omega1 - (50.0f64.powi(2) + 446.67f64.powi(2)).sqrt()).abs() < 1e-12);
        assert!((f.omega1 - 449.46).abs() < 0.005);
    }

    #[test]
    fn chebyshev_ratio_matches_direct_formula() {
        for n in [2usize, 8, 16, 32] {
            for k in 0..200 {
                let phi = 0.013 + k as f64 * 0.031;
                let direct = (n as f64 * phi / 2.0).sin().powi(2) / (phi / 2.0).cos().powi(2);
                let poly = dd_ratio(n, phi.cos());
                assert!((direct - poly).abs() < 1e-8 * (1.0 + direct), "n={n} phi={phi}");
            }
            // Removable point cos(φ/2) = 0: limit is N².
            assert!((dd_ratio(n, -1.0) - (n * n) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn parallel_fields_give_no_decoherence() {
        for tau in [0.3, 4.0, 15.549] {
            let seq = DDSequence::new(32, tau).unwrap();
            assert_eq!(dd_coherence_analytic(&spin(80.0, 0.0), &seq, OMEGA_C), 1.0);
        }
        let seq = DDSequence::new(32, 1e-7).unwrap();
        assert!((dd_coherence_analytic(&spin(80.0, 40.0), &seq, OMEGA_C) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_matches_oracle() {
        let s = spin(-35.0, 25.0);
        for n in [8usize, 16, 32] {
            for k in 1..100 {
                let seq = DDSequence::new(n, 0.2 * k as f64).unwrap();
                let a = dd_coherence_analytic(&s, &seq, OMEGA_C);
                let o = dd_coherence_oracle(&s, &seq, OMEGA_C);
                assert!((a - o).abs() < 1e-9, "n={n} tau={} {a} {o}", seq.tau());
            }
        }
        let seq = DDSequence::new(32, 7.7).unwrap();
        assert!((dd_coherence_oracle(&spin(0.0, 0.0), &seq, OMEGA_C) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minus_manifold_matches_its_oracle() {
        let s = spin(60.0, 30.0);
        let seq = DDSequence::new(16, 3.3).unwrap();
        let a = dd_coherence_analytic_in(&s, &seq, OMEGA_C, Manifold::Minus);
        let o = dd_coherence_oracle_in(&s, &seq, OMEGA_C, Manifold::Minus);
        assert!((a - o).abs() < 1e-9);
    }

    #[test]
    fn resonance_values() {
        let free = spin(0.0, 0.0);
        let t9 = resonance_interval(&free, OMEGA_C, 9).unwrap();
        assert!((t9 - 17.0 / (2.0 * 546.67) * 1e3).abs() < 1e-12);
        assert!((t9 - 15.549).abs() < 5e-4);
        let t1 = resonance_interval(&free, OMEGA_C, 1).unwrap();
        assert!((t9 / t1 - 17.0).abs() < 1e-12);
        assert!(resonance_interval(&free, OMEGA_C, 0).is_err());
    }

    #[test]
    fn resonance_shifts_with_coupling() {
        // a_zz of the same sign as ω_C raises ω1 and shortens τ_k.
        let mut prev = f64::INFINITY;
        for a in [0.0, -20.0, -40.0, -80.0] {
            let t = resonance_interval(&spin(a, 5.0), OMEGA_C, 9).unwrap();
            let f = conditional_frequencies(&spin(a, 5.0), OMEGA_C);
            assert!((t - 17.0e3 / (f.omega0 + f.omega1)).abs() < 1e-12);
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn resonance_is_local_minimum() {
        let s = spin(30.0, 8.0);
        let tk = resonance_interval(&s, OMEGA_C, 9).unwrap();
        let step = 0.01;
        let grid: Vec<f64> = (-30..=30).map(|i| tk + i as f64 * step).collect();
        let vals: Vec<f64> = grid
            .iter()
            .map(|&t| dd_coherence_analytic(&s, &DDSequence::new(32, t).unwrap(), OMEGA_C))
            .collect();
        let (imin, _) = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((grid[imin] - tk).abs() <= 0.5 * step, "min at {} vs {tk}", grid[imin]);
        assert!(vals[imin] < 0.99 && vals[0] > vals[imin] && vals[vals.len() - 1] > vals[imin]);
    }

    #[test]
    fn multi_spin_product_and_joint_oracle() {
        let a = spin(40.0, 20.0);
        let b = spin(-25.0, 35.0);
        let seq = DDSequence::new(32, 15.2).unwrap();
        assert_eq!(multi_spin_coherence(&[a], &seq, OMEGA_C), dd_coherence_analytic(&a, &seq, OMEGA_C));
        let silent = spin(10.0, 0.0);
        assert_eq!(
            multi_spin_coherence(&[a, silent], &seq, OMEGA_C),
            dd_coherence_analytic(&a, &seq, OMEGA_C)
        );
        for k in 0..20 {
            let seq = DDSequence::new(32, 14.0 + 0.1 * k as f64).unwrap();
            let joint = dd_coherence_oracle_joint(&[a, b], &seq, OMEGA_C);
            assert!((joint - multi_spin_coherence(&[a, b], &seq, OMEGA_C)).abs() < 1e-6);
        }
    }

    fn dip_data(s: &CarbonSpin, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let tau = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (tau, dd_coherence_analytic(s, &DDSequence::new(32, tau).unwrap(), OMEGA_C))
            })
            .collect()
    }

    #[test]
    fn carbon_fit_round_trip() {
        let truth = spin(45.0, 30.0);
        let t9 = resonance_interval(&truth, OMEGA_C, 9).unwrap();
        let data = dip_data(&truth, t9 - 0.15, t9 + 0.15, 81);
        let fit = fit_carbon_dip(&data, 32, &[9], OMEGA_C, (20.0, 20.0)).unwrap();
        assert!((fit.a_zz - 45.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.a_perp - 30.0).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn flat_data_is_degenerate() {
        let data: Vec<(f64, f64)> = (0..20).map(|i| (10.0 + 0.1 * i as f64, 1.0)).collect();
        assert!(matches!(fit_carbon_dip(&data, 32, &[9], OMEGA_C, (10.0, 10.0)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ramsey_round_trip() {
        let data: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.025;
                (t, ramsey_model(t, 2000.0, 3.0, 2.0, 0.4, 0.3, 0.5))
            })
            .collect();
        let fit = fit_ramsey(&data, None).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(fit.delta_f, 2000.0) < 1e-6, "{fit:?}");
        assert!(rel(fit.t2_star, 3.0) < 1e-6, "{fit:?}");
        assert!(rel(fit.p, 2.0) < 1e-6);
        assert!(rel(fit.amplitude, 0.4) < 1e-6);
        assert!(rel(fit.phase, 0.3) < 1e-6);
        assert!(rel(fit.offset, 0.5) < 1e-6);
        let fixed = fit_ramsey(&data, Some(2.0)).unwrap();
        assert_eq!(fixed.p, 2.0);
        assert!(rel(fixed.t2_star, 3.0) < 1e-6);
    }

    #[test]
    fn ramsey_zero_amplitude_flagged() {
        let data: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, 0.5)).collect();
        assert!(fit_ramsey(&data, None).is_err());
    }

    #[test]
    fn static_sigma_round_trip() {
        let data: Vec<(f64, f64)> = (0..30).map(|i| {
            let t = i as f64 * 0.5;
            (t, static_envelope(20.0, t))
        }).collect();
        assert!((fit_static_sigma(&data).unwrap() - 20.0).abs() < 1e-6);
        let ones: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 1.0)).collect();
        assert_eq!(fit_static_sigma(&ones).unwrap(), 0.0);
    }
}
