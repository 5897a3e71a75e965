//! Subspace benchmarking algebra: combining the two conditional-gate
//! fidelities into a CNOT fidelity, the bath-averaged fidelity with its trace
//! approximation, and Bloch-vector readout.

use crate::error::{Error, Result};
use crate::qcore::{c, max_abs, trace, CMatrix, DensityMatrix};

use super::clifford::Generator;

/// `¼(√F_ide + √F_not)²`. Inputs are fidelities in `[0, 1]`; tiny negative
/// round-off is treated as zero.
pub fn srb_combine(f_ide: f64, f_not: f64) -> f64 {
    0.25 * (f_ide.max(0.0).sqrt() + f_not.max(0.0).sqrt()).powi(2)
}

/// Largest bath register handled by the exact Kraus average.
pub const MAX_EXACT_BATH_SPINS: u32 = 3;

fn bath_dim(u_exp: &CMatrix, u_target: &CMatrix) -> Result<usize> {
    if u_target.shape() != (4, 4) {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: u_target.nrows(),
        });
    }
    let n = u_exp.nrows();
    if u_exp.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u_exp.ncols(),
        });
    }
    if !n.is_multiple_of(4) || !(n / 4).is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "dimension {n} is not 4 times a power of two"
        )));
    }
    Ok(n / 4)
}

/// Bath-averaged gate fidelity of `u_exp` (system ⊗ bath, system index slow)
/// against `u_target` on the system, bath initially maximally mixed.
///
/// Returns `(exact, approx)`. `exact` is the state-averaged fidelity of the
/// reduced channel with Kraus operators `K_ij = ⟨i|U|j⟩/√d_b`:
/// `(4 + Σ|Tr(T†K_ij)|²·(1/d_b)) / 20`. `approx` is
/// `|Tr((T ⊗ I)†U)|² / (4 d_b)²`.
pub fn bath_channel_fidelity(u_exp: &CMatrix, u_target: &CMatrix) -> Result<(f64, f64)> {
    let db = bath_dim(u_exp, u_target)?;
    if db > 1 << MAX_EXACT_BATH_SPINS {
        return Err(Error::DimensionCap(format!(
            "exact bath average limited to {MAX_EXACT_BATH_SPINS} spins, got dimension {db}"
        )));
    }
    let block = |i: usize, j: usize| CMatrix::from_fn(4, 4, |a, b| u_exp[(a * db + i, b * db + j)]);
    let td = u_target.adjoint();
    let mut kraus_sum = 0.0;
    let mut diag = c(0.0, 0.0);
    for i in 0..db {
        for j in 0..db {
            let t = trace(&(&td * block(i, j)));
            kraus_sum += t.norm_sqr();
            if i == j {
                diag += t;
            }
        }
    }
    let exact = (4.0 + kraus_sum / db as f64) / 20.0;
    let approx = diag.norm_sqr() / (4.0 * db as f64).powi(2);
    Ok((exact, approx))
}

/// Trace fidelities `(F_0, F_1)` of the two nuclear-conditioned electron
/// blocks (nuclear index 0 and 1) of `u_exp`, each `|Tr((T_n ⊗ I)†U_n)|²/(2d_b)²`.
/// Assumes `u_exp` does not couple the nuclear states.
pub fn subspace_fidelities(u_exp: &CMatrix, u_target: &CMatrix) -> Result<(f64, f64)> {
    let db = bath_dim(u_exp, u_target)?;
    let fid = |n: usize, m: usize| {
        // Target block n → m in the nuclear index; electron index slow.
        let mut t = c(0.0, 0.0);
        for e in 0..2 {
            for f in 0..2 {
                let tgt = u_target[(2 * e + m, 2 * f + n)].conj();
                if tgt == c(0.0, 0.0) {
                    continue;
                }
                for k in 0..db {
                    t += tgt * u_exp[((2 * e + m) * db + k, (2 * f + n) * db + k)];
                }
            }
        }
        t.norm_sqr() / (2.0 * db as f64).powi(2)
    };
    Ok((fid(0, 0), fid(1, 1)))
}

/// Bloch vector from three Z-population readouts: none, π_y/2 and π_x/2
/// before readout. `z = 2P₀ − 1`; a +y quarter turn maps `x → −z` and a +x
/// quarter turn maps `y → z`.
pub fn tomography_readout(rho: &DensityMatrix) -> Result<(f64, f64, f64)> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    let p0 = |u: &CMatrix| (u * rho.matrix() * u.adjoint())[(0, 0)].re;
    let z = 2.0 * p0(&CMatrix::identity(2, 2)) - 1.0;
    let x = -(2.0 * p0(&Generator::Y90.matrix()) - 1.0);
    let y = 2.0 * p0(&Generator::X90.matrix()) - 1.0;
    Ok((x, y, z))
}

/// `(1 + |r|²)/2`.
pub fn bloch_purity(r: (f64, f64, f64)) -> f64 {
    0.5 * (1.0 + r.0 * r.0 + r.1 * r.1 + r.2 * r.2)
}

/// Checks `u_exp` leaves the nuclear index unchanged within `tol`.
pub fn is_nuclear_block_diagonal(u_exp: &CMatrix, tol: f64) -> bool {
    let db = u_exp.nrows() / 4;
    let mut off = u_exp.clone();
    for r in 0..u_exp.nrows() {
        for col in 0..u_exp.ncols() {
            if (r / db) % 2 == (col / db) % 2 {
                off[(r, col)] = c(0.0, 0.0);
            }
        }
    }
    max_abs(&off) <= tol
}
