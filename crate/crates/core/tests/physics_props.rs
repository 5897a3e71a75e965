use proptest::prelude::*;
use spingate::ddspec::{dd_coherence_analytic, dd_coherence_oracle, DDSequence};
use spingate::model::CarbonSpin;
use spingate::noise::{classicize, sample_noise, NoiseModel};
use spingate::relax::{analytic_populations, t1_gate_error, Level, RateMatrix};

const OMEGA_C: f64 = -546.67;

fn spin() -> impl Strategy<Value = CarbonSpin> {
    (-100.0f64..100.0, 0.0f64..100.0).prop_map(|(a, b)| CarbonSpin::new(a, b, 0.0).unwrap())
}

fn rates() -> impl Strategy<Value = RateMatrix> {
    (0.0f64..400.0, 0.0f64..400.0, 0.0f64..400.0).prop_map(|(a, b, g)| RateMatrix::new(a, b, g).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coherence_is_bounded_and_matches_oracle(s in spin(), half in 1usize..=32, tau in 0.05f64..30.0) {
        let seq = DDSequence::new(2 * half, tau).unwrap();
        let a = dd_coherence_analytic(&s, &seq, OMEGA_C);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
        prop_assert!((a - dd_coherence_oracle(&s, &seq, OMEGA_C)).abs() < 1e-9);
    }

    #[test]
    fn populations_are_a_distribution(r in rates(), t in 0.0f64..50.0) {
        for init in Level::ALL {
            let p = analytic_populations(&r, t, init);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x > -1e-12));
        }
    }

    #[test]
    fn t1_error_is_linear_in_duration(r in rates(), t in 1.0f64..5000.0) {
        let e1 = t1_gate_error(&r, t);
        prop_assert!(e1 >= 0.0);
        prop_assert!((t1_gate_error(&r, 2.0 * t) - 2.0 * e1).abs() <= 1e-15 * e1.max(1.0));
    }

    #[test]
    fn classicization_adds_in_quadrature(sz in 0.0f64..50.0, sx in 0.0f64..50.0, s in prop::collection::vec(spin(), 0..6)) {
        let m = NoiseModel::new(sz, sx, sx, OMEGA_C, s).unwrap();
        let (cx, cy, cz) = classicize(&m);
        prop_assert!(cx >= sx && cz >= sz && cx == cy);
        let empty = NoiseModel::new(cz, cx, cy, OMEGA_C, Vec::new()).unwrap();
        prop_assert_eq!(classicize(&empty), (cx, cy, cz));
    }

    #[test]
    fn sampling_is_prefix_stable(seed in any::<u64>(), n in 1usize..50) {
        let m = NoiseModel::default().classicized();
        let long = sample_noise(&m, seed, n + 10).unwrap();
        let short = sample_noise(&m, seed, n).unwrap();
        prop_assert_eq!(&long[..n], &short[..]);
    }
}
