use num_complex::Complex64;
use proptest::prelude::*;
use spingate::qcore::{
    expm, expm_hermitian, partial_trace, purity, trace, trace_fidelity, unitarity_error, CMatrix, DensityMatrix,
    UnitaryMatrix,
};

fn hermitian(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), n * n).prop_map(move |v| {
        let a = CMatrix::from_fn(n, n, |i, j| Complex64::new(v[i * n + j].0, v[i * n + j].1));
        (&a + a.adjoint()).scale(0.5)
    })
}

fn sized_hermitian() -> impl Strategy<Value = CMatrix> {
    (2usize..=16).prop_flat_map(hermitian)
}

fn state(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_filter("nonzero", |v| v.iter().any(|z| z.0.abs() + z.1.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(r, i)| Complex64::new(r, i)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermitian_exponential_is_unitary(h in sized_hermitian(), t in -3.0f64..3.0) {
        let u = expm_hermitian(&h, t);
        prop_assert!(unitarity_error(&u) < 1e-11);
    }

    #[test]
    fn determinant_is_trace_phase(h in sized_hermitian(), t in -1.0f64..1.0) {
        let u = expm_hermitian(&h, t);
        let expected = Complex64::from_polar(1.0, -t * trace(&h).re);
        prop_assert!((u.determinant() - expected).norm() < 1e-9);
    }

    #[test]
    fn spectral_and_general_exponentials_agree(h in (2usize..=8).prop_flat_map(hermitian), t in -1.0f64..1.0) {
        let general = expm(&h.map(|z| z * Complex64::new(0.0, -t)));
        prop_assert!((general - expm_hermitian(&h, t)).camax() < 1e-10);
    }

    #[test]
    fn trace_fidelity_is_symmetric(a in hermitian(4), b in hermitian(4)) {
        let ua = UnitaryMatrix::new(expm_hermitian(&a, 0.3)).unwrap();
        let ub = UnitaryMatrix::new(expm_hermitian(&b, 0.3)).unwrap();
        let f1 = trace_fidelity(&ua, &ub, 4).unwrap();
        let f2 = trace_fidelity(&ub, &ua, 4).unwrap();
        prop_assert!((f1 - f2).abs() < 1e-14);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f1));
    }

    #[test]
    fn reduced_state_purity_bounds(psi in state(16)) {
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        prop_assert!((purity(&rho) - 1.0).abs() < 1e-12);
        let red = partial_trace(&rho, &[2, 8], &[0]).unwrap();
        let p = purity(&red);
        prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!((trace(red.matrix()).re - 1.0).abs() < 1e-12);
    }

    /// Both sides of a 4×8 pure state share the Schmidt spectrum: purity = Σ s⁴.
    #[test]
    fn schmidt_purities(psi in state(32)) {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let coeffs = CMatrix::from_fn(4, 8, |i, j| psi[i * 8 + j] / norm);
        let s = coeffs.singular_values();
        let oracle: f64 = s.iter().map(|x| x.powi(4)).sum();
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let left = purity(&partial_trace(&rho, &[4, 8], &[0]).unwrap());
        let right = purity(&partial_trace(&rho, &[4, 8], &[1]).unwrap());
        prop_assert!((left - oracle).abs() < 1e-12);
        prop_assert!((right - oracle).abs() < 1e-12);
    }
}
