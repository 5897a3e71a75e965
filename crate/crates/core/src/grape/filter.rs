//! First-order (filter-function) response of a pulse to weak dephasing.
//!
//! With `R(t) = U_c†(t) S_z U_c(t)` in the noise-free toggling frame and
//! `r_k = Tr(B_k R)/4` over the 15 traceless Pauli strings, weak noise
//! `η(t) = X′cos ωt + Y′sin ωt` with `X′, Y′ ~ N(0, σ²)` costs
//! `σ² Σ_k |∫₀ᵀ r_k(t) e^{iωt} dt|²` of infidelity. The sum is the
//! susceptibility; times `ω²` it is the filter function `F₁(ω)`.

use num_complex::Complex64;

use super::PulseWaveform;
use crate::model::{control_hamiltonian, interaction_generator, omega_sh_khz, qubit_operators, SystemConstants};
use crate::qcore::{c, expm_hermitian, kron, trace, CMatrix};
use crate::units::khz_to_rad_per_ns;

/// Longest quadrature panel, ns.
const PANEL_NS: f64 = 5.0;

/// 8-point Gauss-Legendre nodes and weights on [−1, 1].
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

fn pauli_strings() -> Vec<CMatrix> {
    let i2 = CMatrix::identity(2, 2);
    let x = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let y = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
    let z = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    let single = [i2, x, y, z];
    let mut out = Vec::with_capacity(15);
    for (a, sa) in single.iter().enumerate() {
        for (b, sb) in single.iter().enumerate() {
            if a + b > 0 {
                out.push(kron(sa, sb));
            }
        }
    }
    out
}

/// `Σ_k |∫ r_k e^{iωt} dt|²` in ns², `omega` in kHz.
pub fn noise_susceptibility(pulse: &PulseWaveform, omega: f64, sys: &SystemConstants) -> f64 {
    let basis = pauli_basis();
    let sz = qubit_operators().sz;
    let w = khz_to_rad_per_ns(omega);
    let h_int = interaction_generator(sys.a_par_eff, omega_sh_khz(pulse.total_duration()));
    let mut acc = vec![Complex64::new(0.0, 0.0); basis.len()];
    let mut u0 = CMatrix::identity(4, 4);
    let mut t0 = 0.0;
    for p in pulse.pieces() {
        let h = &h_int + control_hamiltonian(p.omega_r, p.omega_i);
        let panels = (p.duration / PANEL_NS).ceil().max(1.0) as usize;
        let len = p.duration / panels as f64;
        for j in 0..panels {
            let a = j as f64 * len;
            for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let tau = a + 0.5 * len * (x + 1.0);
                let u = expm_hermitian(&h, tau) * &u0;
                let r = u.adjoint() * &sz * &u;
                let phase = Complex64::from_polar(0.5 * len * wt, w * (t0 + tau));
                for (k, b) in basis.iter().enumerate() {
                    acc[k] += trace(&(b * &r)) / 4.0 * phase;
                }
            }
        }
        u0 = expm_hermitian(&h, p.duration) * u0;
        t0 += p.duration;
    }
    acc.iter().map(|v| v.norm_sqr()).sum()
}

fn pauli_basis() -> &'static [CMatrix] {
    use std::sync::OnceLock;
    static BASIS: OnceLock<Vec<CMatrix>> = OnceLock::new();
    BASIS.get_or_init(pauli_strings)
}

/// `F₁(ω) = ω²·susceptibility` (dimensionless, `ω` in rad/ns internally).
pub fn filter_function_first_order(pulse: &PulseWaveform, omega: f64, sys: &SystemConstants) -> f64 {
    khz_to_rad_per_ns(omega).powi(2) * noise_susceptibility(pulse, omega, sys)
}

/// Leading-order infidelity added by quadrature noise of strength `sigma`
/// (kHz) at `omega` (kHz).
pub fn first_order_infidelity(pulse: &PulseWaveform, omega: f64, sigma: f64, sys: &SystemConstants) -> f64 {
    khz_to_rad_per_ns(sigma).powi(2) * noise_susceptibility(pulse, omega, sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_strings_are_orthonormal() {
        let b = pauli_strings();
        assert_eq!(b.len(), 15);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let t = trace(&(x * y)) / 4.0;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((t - c(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn free_evolution_is_sinc() {
        let sys = SystemConstants::default();
        let p = PulseWaveform::zero(30, 50.0).unwrap();
        let t = 1500.0;
        for omega in [0.0, 100.0, 333.3, 546.67, 1200.0] {
            let w = khz_to_rad_per_ns(omega);
            let x = w * t / 2.0;
            let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
            let want = 0.25 * t * t * sinc * sinc;
            let got = noise_susceptibility(&p, omega, &sys);
            assert!((got - want).abs() <= 1e-9 * t * t, "{omega}: {got} vs {want}");
        }
        // Peak at zero frequency.
        assert!(noise_susceptibility(&p, 0.0, &sys) > noise_susceptibility(&p, 50.0, &sys));
    }

    #[test]
    fn filter_is_non_negative_and_zero_at_dc() {
        let sys = SystemConstants::default();
        let p = crate::grape::primitive_pulse(sys.a_par_eff).unwrap();
        assert_eq!(filter_function_first_order(&p, 0.0, &sys), 0.0);
        for omega in [10.0, 200.0, 546.67, 3000.0] {
            assert!(filter_function_first_order(&p, omega, &sys) >= 0.0);
        }
    }
}
