//! Dense matrix exponentials.
//!
//! [`expm`] is the scaling-and-squaring Padé algorithm of Higham (2005), used
//! for general complex generators. [`HermitianExp`] diagonalizes a hermitian
//! generator once and then provides both `exp(-i H t)` and its exact
//! directional derivative, which is what the pulse optimizer needs.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::CMatrix;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE_9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error thresholds on the 1-norm for each Padé degree.
const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.53939833006323e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068;
const THETA_13: f64 = 5.371920351148152;

pub(crate) fn norm1(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled_identity(n: usize, s: f64) -> CMatrix {
    CMatrix::from_diagonal_element(n, n, Complex64::new(s, 0.0))
}

/// Matrix exponential `exp(a)` of a general square complex matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = norm1(a);
    let ident = scaled_identity(n, 1.0);

    let low_order = [
        (THETA_3, &PADE_3[..]),
        (THETA_5, &PADE_5[..]),
        (THETA_7, &PADE_7[..]),
        (THETA_9, &PADE_9[..]),
    ];
    for (theta, coeffs) in low_order {
        if norm <= theta {
            return pade_low(a, &ident, coeffs);
        }
    }

    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));
    let mut result = pade_13(&scaled, &ident);
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn pade_low(a: &CMatrix, ident: &CMatrix, b: &[f64]) -> CMatrix {
    let a2 = a * a;
    let degree = b.len() - 1;
    // U = A * sum_k b[2k+1] A^{2k},  V = sum_k b[2k] A^{2k}
    let mut power = ident.clone();
    let mut u_inner = ident.scale(b[1]);
    let mut v = ident.scale(b[0]);
    let mut k = 2;
    while k <= degree {
        power = &power * &a2;
        v += power.scale(b[k]);
        if k < degree {
            u_inner += power.scale(b[k + 1]);
        }
        k += 2;
    }
    let u = a * u_inner;
    solve_pade(&u, &v)
}

fn pade_13(a: &CMatrix, ident: &CMatrix) -> CMatrix {
    let b = &PADE_13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = a6.scale(b[13]) + a4.scale(b[11]) + a2.scale(b[9]);
    let u_inner = &a6 * u_hi + a6.scale(b[7]) + a4.scale(b[5]) + a2.scale(b[3]) + ident.scale(b[1]);
    let u = a * u_inner;
    let v_hi = a6.scale(b[12]) + a4.scale(b[10]) + a2.scale(b[8]);
    let v = &a6 * v_hi + a6.scale(b[6]) + a4.scale(b[4]) + a2.scale(b[2]) + ident.scale(b[0]);
    solve_pade(&u, &v)
}

fn solve_pade(u: &CMatrix, v: &CMatrix) -> CMatrix {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for scaled arguments")
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Unitary `exp(-i * h * t)` for a hermitian `h`.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    HermitianExp::new(h, t).unitary()
}

/// Spectral form of `exp(-i H t)` for a hermitian `H`.
///
/// Derivatives use the Daleckii-Krein divided-difference formula, which is
/// exact for any perturbation direction `E`:
/// `d/de exp(-i (H + e E) t) = V (Φ ∘ (V† E V)) V†` with
/// `Φ_jk = (e^{-iλ_j t} - e^{-iλ_k t}) / (λ_j - λ_k)` scaled appropriately.
#[derive(Debug, Clone)]
pub struct HermitianExp {
    vectors: CMatrix,
    phases: Vec<Complex64>,
    eigenvalues: Vec<f64>,
    t: f64,
}

impl HermitianExp {
    pub fn new(h: &CMatrix, t: f64) -> Self {
        let n = h.nrows();
        // Symmetrize so the eigen-solver sees an exactly hermitian input.
        let herm = (h + h.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(herm);
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let phases = eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * t))
            .collect();
        debug_assert_eq!(eig.eigenvectors.nrows(), n);
        Self {
            vectors: eig.eigenvectors,
            phases,
            eigenvalues,
            t,
        }
    }

    pub fn unitary(&self) -> CMatrix {
        let n = self.phases.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let ph = self.phases[j];
            for i in 0..n {
                scaled[(i, j)] *= ph;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// Derivative of `exp(-i (H + e E) t)` with respect to `e` at `e = 0`.
    pub fn derivative(&self, direction: &CMatrix) -> CMatrix {
        let n = self.phases.len();
        let rotated = self.vectors.adjoint() * direction * &self.vectors;
        let mut inner = DMatrix::zeros(n, n);
        let t = self.t;
        for j in 0..n {
            for k in 0..n {
                // (e^{-iλj t} - e^{-iλk t}) / (λj - λk) written in a form that
                // stays accurate as the gap closes.
                let half = 0.5 * (self.eigenvalues[j] - self.eigenvalues[k]) * t;
                let mid = -0.5 * (self.eigenvalues[j] + self.eigenvalues[k]) * t;
                let phi = Complex64::new(0.0, -t) * Complex64::from_polar(sinc(half), mid);
                inner[(j, k)] = phi * rotated[(j, k)];
            }
        }
        &self.vectors * inner * self.vectors.adjoint()
    }
}
