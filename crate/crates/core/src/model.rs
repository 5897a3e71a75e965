//! Hamiltonian builders.
//!
//! Builders return angular generators in rad/ns; their arguments are plain
//! frequencies in kHz and times in ns.
//!
//! The reduced qubit pair uses the basis `|0,+1⟩, |0,0⟩, |−1,+1⟩, |−1,0⟩`
//! (`m_S, m_I`, electron slow). Qubit `Sz = +1/2` is `m_S = 0` and qubit
//! `Iz = +1/2` is `m_I = +1`, so the drive is resonant in the lower-right block.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{c, identity, kron, kron_all, spin_operators, CMatrix};
use crate::units::khz_to_rad_per_ns;

/// Electron gyromagnetic ratio in kHz/G.
pub const GAMMA_E_KHZ_PER_GAUSS: f64 = 2802.495;

/// Largest number of quantum carbons simulated jointly with the system.
pub const MAX_BATH_SPINS: usize = 6;

/// Indices of `|0,+1⟩, |0,0⟩, |−1,+1⟩, |−1,0⟩` inside the 3×3 product basis
/// ordered `m = +1, 0, −1` per spin.
pub const QUBIT_LEVELS: [usize; 4] = [3, 4, 6, 7];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConstants {
    /// Zero-field splitting, kHz.
    pub d: f64,
    /// Nitrogen quadrupole coupling, kHz.
    pub q: f64,
    pub a_par_n: f64,
    pub a_perp_n: f64,
    /// `γ_e / γ_N`.
    pub gamma_ratio: f64,
    /// Field in gauss.
    pub b0: f64,
    /// Signed carbon Larmor frequency, kHz.
    pub omega_c: f64,
    /// Effective hyperfine coupling of the reduced qubit pair, kHz.
    pub a_par_eff: f64,
    /// Gate duration, ns.
    pub t_gate: f64,
}

impl Default for SystemConstants {
    fn default() -> Self {
        Self {
            d: 2_869_901.0,
            q: -4945.8003,
            a_par_n: -2164.6714,
            a_perp_n: -2632.8,
            gamma_ratio: -9113.77,
            b0: 510.0,
            omega_c: -546.67,
            a_par_eff: 2159.876,
            t_gate: 1500.0,
        }
    }
}

impl SystemConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d,
            self.q,
            self.a_par_n,
            self.a_perp_n,
            self.gamma_ratio,
            self.b0,
            self.omega_c,
            self.a_par_eff,
            self.t_gate,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite system constant".into()));
        }
        if !(self.t_gate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "t_gate must be positive, got {}",
                self.t_gate
            )));
        }
        if self.gamma_ratio == 0.0 {
            return Err(Error::InvalidArgument("gamma_ratio must be nonzero".into()));
        }
        Ok(())
    }

    /// Electron Zeeman frequency `γ_e B0`, kHz.
    pub fn gamma_e_b0(&self) -> f64 {
        GAMMA_E_KHZ_PER_GAUSS * self.b0
    }

    /// Nitrogen Zeeman frequency `γ_N B0`, kHz.
    pub fn gamma_n_b0(&self) -> f64 {
        self.gamma_e_b0() / self.gamma_ratio
    }

    /// Frame shift `1 / (4 T_gate)`, kHz.
    pub fn omega_sh(&self) -> f64 {
        omega_sh_khz(self.t_gate)
    }
}

/// `1 / (4 T)` in kHz for `T` in ns.
pub fn omega_sh_khz(t_gate_ns: f64) -> f64 {
    1e6 / (4.0 * t_gate_ns)
}

/// One strongly coupled carbon spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarbonSpin {
    /// kHz.
    pub a_zz: f64,
    /// `√(A_zx² + A_zy²)`, kHz; never negative.
    pub a_perp: f64,
    /// Azimuth of the transverse coupling, rad.
    #[serde(default)]
    pub phi: f64,
}

impl CarbonSpin {
    pub fn new(a_zz: f64, a_perp: f64, phi: f64) -> Result<Self> {
        let spin = Self { a_zz, a_perp, phi };
        spin.validate()?;
        Ok(spin)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a_perp >= 0.0) || !self.a_zz.is_finite() || !self.phi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "invalid carbon spin {:?}: a_perp must be non-negative and all values finite",
                self
            )));
        }
        Ok(())
    }

    pub fn a_zx(&self) -> f64 {
        self.a_perp * self.phi.cos()
    }

    pub fn a_zy(&self) -> f64 {
        self.a_perp * self.phi.sin()
    }
}

/// Spin-1/2 operators of the reduced qubit pair, embedded in 4×4.
#[derive(Debug, Clone)]
pub struct QubitOperators {
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
    pub iz: CMatrix,
}

pub fn qubit_operators() -> QubitOperators {
    let s = spin_operators(0.5).expect("spin 1/2 is supported");
    let id = identity(2);
    QubitOperators {
        sx: kron(&s.sx, &id),
        sy: kron(&s.sy, &id),
        sz: kron(&s.sz, &id),
        iz: kron(&id, &s.sz),
    }
}

/// Target gate: flips the electron when `m_I = 0`.
pub fn cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = c(1.0, 0.0);
    m[(2, 2)] = c(1.0, 0.0);
    m[(1, 3)] = c(1.0, 0.0);
    m[(3, 1)] = c(1.0, 0.0);
    m
}

fn full_hamiltonian_khz(c_: &SystemConstants) -> CMatrix {
    let s = spin_operators(1.0).expect("spin 1 is supported");
    let id = identity(3);
    let (sx, sy, sz) = (kron(&s.sx, &id), kron(&s.sy, &id), kron(&s.sz, &id));
    let (ix, iy, iz) = (kron(&id, &s.sx), kron(&id, &s.sy), kron(&id, &s.sz));
    (&sz * &sz).scale(c_.d)
        + sz.scale(c_.gamma_e_b0())
        + (&iz * &iz).scale(c_.q)
        + iz.scale(c_.gamma_n_b0())
        + (&sz * &iz).scale(c_.a_par_n)
        + (&sx * &ix + &sy * &iy).scale(c_.a_perp_n)
}

/// Nine-level lab-frame generator of the electron-nitrogen pair.
pub fn full_hamiltonian(c_: &SystemConstants) -> CMatrix {
    full_hamiltonian_khz(c_).scale(khz_to_rad_per_ns(1.0))
}

/// Eigen-decomposition of the nine-level Hamiltonian labelled by product state.
#[derive(Debug, Clone)]
pub struct DressedLevels {
    /// Energy in kHz of the eigenstate adiabatically connected to product
    /// state `k` (`k = 3·(1 − m_S) + (1 − m_I)`).
    pub energies_khz: [f64; 9],
    /// Column `k` is the eigenvector labelled by product state `k`.
    pub vectors: CMatrix,
}

impl DressedLevels {
    /// `[E(−1,+1) − E(0,+1)] − [E(−1,0) − E(0,0)]`, kHz.
    pub fn effective_coupling(&self) -> f64 {
        let e = &self.energies_khz;
        let [p0, z0, pm, zm] = QUBIT_LEVELS;
        (e[pm] - e[p0]) - (e[zm] - e[z0])
    }

    /// Rows and columns of the qubit subspace, in reduced-basis order.
    pub fn qubit_energies_khz(&self) -> [f64; 4] {
        QUBIT_LEVELS.map(|k| self.energies_khz[k])
    }
}

/// Exact diagonalization of the nine-level Hamiltonian.
pub fn dressed_levels(c_: &SystemConstants) -> Result<DressedLevels> {
    c_.validate()?;
    let h = full_hamiltonian_khz(c_);
    let eig = SymmetricEigen::new(h);
    // Greedy assignment by largest overlap; the mixing is perturbative.
    let mut taken = [false; 9];
    let mut energies = [0.0; 9];
    let mut vectors = CMatrix::zeros(9, 9);
    let mut order: Vec<(f64, usize, usize)> = Vec::with_capacity(81);
    for col in 0..9 {
        for k in 0..9 {
            order.push((eig.eigenvectors[(k, col)].norm_sqr(), k, col));
        }
    }
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut used_col = [false; 9];
    for (_, k, col) in order {
        if taken[k] || used_col[col] {
            continue;
        }
        taken[k] = true;
        used_col[col] = true;
        energies[k] = eig.eigenvalues[col];
        // Fix the phase so the dominant component is real positive.
        let phase = eig.eigenvectors[(k, col)];
        let phase = phase / phase.norm();
        for r in 0..9 {
            vectors[(r, k)] = eig.eigenvectors[(r, col)] * phase.conj();
        }
    }
    if taken.iter().any(|t| !t) {
        return Err(Error::Degenerate("could not label dressed levels".into()));
    }
    Ok(DressedLevels {
        energies_khz: energies,
        vectors,
    })
}

/// `A·Sz(Iz + 1/2) + ω_sh·(Iz − 1/2)` for explicit `A` and `ω_sh` in kHz.
pub fn interaction_generator(a_par_eff: f64, omega_sh: f64) -> CMatrix {
    let ops = qubit_operators();
    let half = identity(4).scale(0.5);
    let h = (&ops.sz * (&ops.iz + &half)).scale(a_par_eff) + (&ops.iz - &half).scale(omega_sh);
    h.scale(khz_to_rad_per_ns(1.0))
}

/// Drift of the reduced system in the rotating frame.
pub fn interaction_hamiltonian(c_: &SystemConstants) -> CMatrix {
    interaction_generator(c_.a_par_eff, c_.omega_sh())
}

/// `Ω_r Sx + Ω_i Sy` on the electron.
pub fn control_hamiltonian(omega_r: f64, omega_i: f64) -> CMatrix {
    let ops = qubit_operators();
    (ops.sx.scale(omega_r) + ops.sy.scale(omega_i)).scale(khz_to_rad_per_ns(1.0))
}

/// Classical noise amplitude `x cos(ω_C t) + y sin(ω_C t) + z` in kHz.
pub fn noise_coefficient(x: f64, y: f64, z: f64, omega_c: f64, t_ns: f64) -> f64 {
    let phase = khz_to_rad_per_ns(omega_c) * t_ns;
    x * phase.cos() + y * phase.sin() + z
}

/// `(x cos(ω_C t) + y sin(ω_C t) + z)·Sz` on the electron.
pub fn classical_noise_generator(x: f64, y: f64, z: f64, omega_c: f64, t_ns: f64) -> CMatrix {
    qubit_operators()
        .sz
        .scale(khz_to_rad_per_ns(noise_coefficient(x, y, z, omega_c, t_ns)))
}

/// Carbon part of the joint system ⊗ bath generator, dimension `4·2^n`.
///
/// The caller adds the system generator embedded as `H_sys ⊗ I_bath`.
pub fn bath_joint_hamiltonian(c_: &SystemConstants, spins: &[CarbonSpin]) -> Result<CMatrix> {
    if spins.len() > MAX_BATH_SPINS {
        return Err(Error::DimensionCap(format!(
            "{} carbon spins requested, at most {MAX_BATH_SPINS} supported",
            spins.len()
        )));
    }
    for s in spins {
        s.validate()?;
    }
    let n = spins.len();
    let half = spin_operators(0.5).expect("spin 1/2 is supported");
    let sz = qubit_operators().sz;
    let id4 = identity(4);
    let id2 = identity(2);
    let dim = 4 << n;
    let mut h = CMatrix::zeros(dim, dim);
    for (i, spin) in spins.iter().enumerate() {
        let embed = |op: &CMatrix, sys: &CMatrix| -> CMatrix {
            let mut factors: Vec<&CMatrix> = Vec::with_capacity(n + 1);
            factors.push(sys);
            for j in 0..n {
                factors.push(if j == i { op } else { &id2 });
            }
            kron_all(&factors)
        };
        let shifted_larmor = c_.omega_c - spin.a_zz / 2.0;
        let coupling = half.sx.scale(spin.a_zx()) + half.sy.scale(spin.a_zy()) + half.sz.scale(spin.a_zz);
        h += embed(&half.sz, &id4).scale(shifted_larmor);
        h += embed(&coupling, &sz);
    }
    Ok(h.scale(khz_to_rad_per_ns(1.0)))
}

/// Nine-level lab-frame generator with a linearly polarized drive.
///
/// The drive is `√2·(Ω_r cos ωt + Ω_i sin ωt)·Sx` on the spin-1 electron, so
/// that the co-rotating part reproduces `Ω_r Sx + Ω_i Sy` on a spin-1/2
/// transition (spin-1 `Sx` matrix elements are `1/√2`). `omega_mw` is the
/// signed carrier frequency in kHz.
pub fn lab_frame_drive(
    c_: &SystemConstants,
    pulse_piece: (f64, f64),
    t_ns: f64,
    omega_mw: f64,
) -> CMatrix {
    let h0 = full_hamiltonian(c_);
    let (omega_r, omega_i) = pulse_piece;
    if omega_r == 0.0 && omega_i == 0.0 {
        return h0;
    }
    let phase = khz_to_rad_per_ns(omega_mw) * t_ns;
    let amp = std::f64::consts::SQRT_2 * (omega_r * phase.cos() + omega_i * phase.sin());
    h0 + electron_sx_spin1().scale(khz_to_rad_per_ns(amp))
}

pub(crate) fn electron_sx_spin1() -> CMatrix {
    let s = spin_operators(1.0).expect("spin 1 is supported");
    kron(&s.sx, &identity(3))
}
