use serde::{Deserialize, Serialize};

use super::PulseWaveform;
use crate::error::Result;
use crate::model::{
    bath_joint_hamiltonian, cnot, control_hamiltonian, interaction_generator, omega_sh_khz, CarbonSpin,
    SystemConstants,
};
use crate::qcore::{c, expm_hermitian, identity, kron, spin_operators, trace, CMatrix};
use crate::units::khz_to_rad_per_ns;

/// Nuclear subspace the electron starts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuclearBranch {
    /// `m_I = 0`, where the gate flips the electron.
    Not,
    /// `m_I = +1`, where the gate is the identity.
    Identity,
}

impl NuclearBranch {
    fn nuclear_index(self) -> usize {
        match self {
            NuclearBranch::Not => 1,
            NuclearBranch::Identity => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathEvaluation {
    /// Gate fidelity `|Tr((U_CNOT ⊗ I)† U)|² / (4 d_b)²` in the carbons'
    /// Larmor interaction picture.
    pub fidelity: f64,
    /// `(t ns, Tr ρ_sys²)` at t = 0 and after every piece.
    pub purity_trace: Vec<(f64, f64)>,
}

impl BathEvaluation {
    pub fn final_purity(&self) -> f64 {
        self.purity_trace.last().map(|p| p.1).unwrap_or(1.0)
    }
}

/// Joint unitary evolution of the qubit pair with explicit carbon spins.
///
/// The electron starts in `(|0⟩ + |1⟩)/√2`, the nucleus in the branch's
/// state and the bath maximally mixed. The mixed bath is carried as `d_b`
/// pure columns `ψ ⊗ |j⟩`, which is exact.
pub fn evaluate_quantum_bath(
    pulse: &PulseWaveform,
    spins: &[CarbonSpin],
    sys: &SystemConstants,
    branch: NuclearBranch,
) -> Result<BathEvaluation> {
    let h_bath = bath_joint_hamiltonian(sys, spins)?;
    let n = spins.len();
    let d_b = 1usize << n;
    let dim = 4 * d_b;
    let t_total = pulse.total_duration();
    let h_int = interaction_generator(sys.a_par_eff, omega_sh_khz(t_total));
    let id_b = identity(d_b);

    // Columns ψ ⊗ |j⟩ for j over the bath basis.
    let nuc = branch.nuclear_index();
    let amp = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut psi = CMatrix::zeros(dim, d_b);
    for j in 0..d_b {
        psi[(nuc * d_b + j, j)] = amp;
        psi[((2 + nuc) * d_b + j, j)] = amp;
    }

    let purity = |psi: &CMatrix| -> f64 {
        // ρ_sys[a, a'] = Σ_{b, j} ψ[(a, b), j] ψ*[(a', b), j] / d_b.
        let mut rho = CMatrix::zeros(4, 4);
        for a in 0..4 {
            for a2 in 0..4 {
                let mut s = c(0.0, 0.0);
                for b in 0..d_b {
                    for j in 0..d_b {
                        s += psi[(a * d_b + b, j)] * psi[(a2 * d_b + b, j)].conj();
                    }
                }
                rho[(a, a2)] = s / d_b as f64;
            }
        }
        trace(&(&rho * &rho)).re
    };

    let mut u = CMatrix::identity(dim, dim);
    let mut t = 0.0;
    let mut purity_trace = vec![(0.0, purity(&psi))];
    for p in pulse.pieces() {
        let h = kron(&(&h_int + control_hamiltonian(p.omega_r, p.omega_i)), &id_b) + &h_bath;
        let step = expm_hermitian(&h, p.duration);
        psi = &step * psi;
        u = step * u;
        t += p.duration;
        purity_trace.push((t, purity(&psi)));
    }

    // Remove each carbon's own precession: I ⊗ exp(+i Σ ω_C^i I_z^i T).
    let half = spin_operators(0.5)?;
    let mut frame = identity(4);
    for s in spins {
        let w = khz_to_rad_per_ns(sys.omega_c - s.a_zz / 2.0);
        frame = kron(&frame, &expm_hermitian(&half.sz, -w * t_total));
    }
    let u_frame = frame * u;
    let target = kron(&cnot(), &id_b);
    let overlap = trace(&(target.adjoint() * u_frame));
    Ok(BathEvaluation {
        fidelity: overlap.norm_sqr() / (dim as f64).powi(2),
        purity_trace,
    })
}
