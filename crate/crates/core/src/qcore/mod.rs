//! Small dense complex linear algebra for spin operators.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Basis ordering throughout the
//! crate is the `Sz` eigenbasis in descending order (`+s` first), and tensor
//! products are taken as `system ⊗ bath` with the electron before the nucleus.

mod expm;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use expm::{expm, expm_hermitian, HermitianExp};

pub type CMatrix = DMatrix<Complex64>;

pub const UNITARITY_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The three angular-momentum matrices of one spin.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
}

/// Angular-momentum matrices for spin 1/2 or spin 1 in the descending `Sz`
/// eigenbasis.
pub fn spin_operators(s: f64) -> Result<SpinOperators> {
    let dim = if s == 0.5 {
        2
    } else if s == 1.0 {
        3
    } else {
        return Err(Error::UnsupportedSpin(s));
    };
    let m: Vec<f64> = (0..dim).map(|k| s - k as f64).collect();
    let mut sz = CMatrix::zeros(dim, dim);
    let mut sp = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        sz[(k, k)] = c(m[k], 0.0);
        if k + 1 < dim {
            // <m+1| S+ |m> = sqrt(s(s+1) - m(m+1))
            let mk = m[k + 1];
            sp[(k, k + 1)] = c((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
        }
    }
    let sm = sp.adjoint();
    let sx = (&sp + &sm).scale(0.5);
    let sy = (&sp - &sm) * c(0.0, -0.5);
    Ok(SpinOperators { sx, sy, sz })
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `A ⊗ B ⊗ ...` of a list of factors.
pub fn kron_all(factors: &[&CMatrix]) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for f in factors {
        out = out.kronecker(*f);
    }
    out
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_error(h: &CMatrix) -> f64 {
    max_abs(&(h - h.adjoint()))
}

pub fn unitarity_error(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - identity(n)))
}

pub fn trace(a: &CMatrix) -> Complex64 {
    a.diagonal().iter().sum()
}

/// `|Tr(target† actual) / d|²` on raw matrices.
pub fn trace_fidelity_raw(target: &CMatrix, actual: &CMatrix, d: f64) -> f64 {
    let overlap: Complex64 = target
        .iter()
        .zip(actual.iter())
        .map(|(t, a)| t.conj() * a)
        .sum();
    (overlap / d).norm_sqr()
}

/// A square complex matrix that is unitary to within [`UNITARITY_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let err = unitarity_error(&m);
        if err > UNITARITY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

/// A hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let herm = hermiticity_error(&m);
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = trace(&m);
        if (tr - c(1.0, 0.0)).norm() > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        let min_eig = SymmetricEigen::new(sym)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self(m))
    }

    /// `|ψ⟩⟨ψ|` for a state vector, normalized on the way in.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero state vector".into()));
        }
        let n = psi.len();
        let m = CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Self::new(m)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self(identity(n).scale(1.0 / n as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    // Reductions and unitary conjugations of a valid state are valid states.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        Self(m)
    }
}

/// Piecewise-constant evolution step: `duration` in ns, `generator` in rad/ns.
#[derive(Debug, Clone)]
pub struct HamiltonianSegment {
    duration: f64,
    generator: CMatrix,
}

impl HamiltonianSegment {
    pub fn new(duration: f64, generator: CMatrix) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "segment duration must be positive, got {duration}"
            )));
        }
        let herm = hermiticity_error(&generator);
        if herm > HERMITIAN_TOL * (1.0 + max_abs(&generator)) {
            return Err(Error::NotHermitian(herm));
        }
        Ok(Self {
            duration,
            generator,
        })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }
}

/// Time-ordered product `exp(-i H_n t_n) ... exp(-i H_1 t_1)`.
pub fn piecewise_propagator(segments: &[HamiltonianSegment]) -> Result<UnitaryMatrix> {
    let first = segments
        .first()
        .ok_or_else(|| Error::InvalidArgument("no segments".into()))?;
    let dim = first.dim();
    let mut u = identity(dim);
    for seg in segments {
        if seg.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: seg.dim(),
            });
        }
        let step = expm(&(seg.generator() * c(0.0, -seg.duration())));
        u = step * u;
    }
    UnitaryMatrix::new(u)
}

pub(crate) fn partial_trace_raw(rho: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let n = dims.len();
    let kept: Vec<usize> = (0..n).filter(|k| keep.contains(k)).collect();
    let traced: Vec<usize> = (0..n).filter(|k| !keep.contains(k)).collect();
    let kept_dim: usize = kept.iter().map(|&k| dims[k]).product();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // Row-major strides: the first subsystem is the slowest index.
    let mut strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let offset = |group: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &k in group.iter().rev() {
            off += (idx % dims[k]) * strides[k];
            idx /= dims[k];
        }
        off
    };
    let kept_off: Vec<usize> = (0..kept_dim).map(|i| offset(&kept, i)).collect();
    let traced_off: Vec<usize> = (0..traced_dim).map(|i| offset(&traced, i)).collect();

    CMatrix::from_fn(kept_dim, kept_dim, |a, b| {
        traced_off
            .iter()
            .map(|&t| rho[(kept_off[a] + t, kept_off[b] + t)])
            .sum()
    })
}

/// Reduced state on the subsystems listed in `keep`.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let total: usize = dims.iter().product();
    if total != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: total,
        });
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "subsystem index {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    Ok(DensityMatrix::from_trusted(partial_trace_raw(
        rho.matrix(),
        dims,
        keep,
    )))
}

pub(crate) fn purity_raw(rho: &CMatrix) -> f64 {
    // Tr(ρ²) = Σ |ρ_ij|² for hermitian ρ.
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    purity_raw(rho.matrix())
}

/// `|Tr(target† actual) / d|²`, insensitive to global phases.
pub fn trace_fidelity(target: &UnitaryMatrix, actual: &UnitaryMatrix, d: usize) -> Result<f64> {
    if target.dim() != actual.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            found: actual.dim(),
        });
    }
    Ok(trace_fidelity_raw(target.matrix(), actual.matrix(), d as f64))
}
