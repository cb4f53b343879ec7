use proptest::prelude::*;

use betajacobi::covariance::basis_l;
use betajacobi::eig::{bisection_eigenvalues, eigenvalues, sturm_count, DEFAULT_TOL};
use betajacobi::model::{assemble_gram, replicate_stream, sample_factor};
use betajacobi::paths::{enumerate_bridges, trace_via_paths};
use betajacobi::spectral::{cheb_coeffs, cheb_gamma};
use betajacobi::{AsymptoticParams, EnsembleParams, SymTridiagonal, TestFunction};

fn tridiagonal(max_n: usize) -> impl Strategy<Value = SymTridiagonal> {
    (1..=max_n).prop_flat_map(|n| {
        (prop::collection::vec(-2.0..2.0f64, n), prop::collection::vec(-2.0..2.0f64, n - 1))
            .prop_map(|(d, e)| SymTridiagonal::new(d, e).unwrap())
    })
}

fn ensemble() -> impl Strategy<Value = EnsembleParams> {
    (1..=40usize, prop::sample::select(vec![0.5, 1.0, 2.0, 4.0]), 0.1..30.0f64, 0.1..30.0f64)
        .prop_map(|(n, beta, d1, d2)| EnsembleParams::new(n, beta, n as f64 + d1, n as f64 + d2).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_sorted_and_counted(a in tridiagonal(40)) {
        let v = eigenvalues(&a, DEFAULT_TOL).unwrap().values;
        prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        for (i, l) in v.iter().enumerate() {
            let gap = 1e-9 * (1.0 + l.abs());
            prop_assert!(sturm_count(&a, l - gap) <= i);
            prop_assert!(sturm_count(&a, l + gap) > i);
        }
    }

    #[test]
    fn ql_matches_bisection(a in tridiagonal(24)) {
        let ql = eigenvalues(&a, DEFAULT_TOL).unwrap().values;
        let bis = bisection_eigenvalues(&a, 1e-14);
        for (x, y) in ql.iter().zip(&bis) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_spectrum_in_unit_interval(p in ensemble(), seed in any::<u64>()) {
        let mut rng = replicate_stream(seed, 0);
        let a = assemble_gram(&sample_factor(&p, &mut rng).unwrap());
        let v = a.eigenvalues().unwrap().values;
        prop_assert!(v.iter().all(|l| *l >= -1e-12 && *l <= 1.0 + 1e-12));
    }

    #[test]
    fn power_traces_match_spectrum(p in ensemble(), seed in any::<u64>()) {
        let mut rng = replicate_stream(seed, 1);
        let factor = sample_factor(&p, &mut rng).unwrap();
        let a = assemble_gram(&factor);
        let v = a.eigenvalues().unwrap().values;
        let t = a.power_traces(5);
        prop_assert_eq!(t[0], p.n as f64);
        for k in 1..=5 {
            let s: f64 = v.iter().map(|l| l.powi(k as i32)).sum();
            prop_assert!((t[k] - s).abs() <= 1e-11 * t[k].max(1e-300));
            let via = trace_via_paths(&factor, k).unwrap();
            prop_assert!((t[k] - via).abs() <= 1e-11 * t[k].max(1e-300));
        }
    }

    #[test]
    fn basis_rows_reconstruct_monomials(a in 0.05..0.45f64, t in 0.0..1.0f64, x in 0.0..1.0f64) {
        let b = a + t * (1.0 - 2.0 * a);
        let s = AsymptoticParams::from_ab(a, b, 1.0).unwrap().support().unwrap();
        let l = basis_l(10, &s).unwrap();
        for n in 0..=10 {
            prop_assert!((l.reconstruct(n, x) - x.powi(n as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_orthonormality(m in 1..=10usize) {
        let s = AsymptoticParams::from_ab(0.25, 0.5, 1.0).unwrap().support().unwrap();
        let ch = cheb_coeffs(&TestFunction::gamma(m, s), 12, &s, 512).unwrap();
        for n in 1..=12 {
            let want = if n == m { 1.0 } else { 0.0 };
            prop_assert!((ch.fhat[n] - want).abs() < 1e-10);
        }
        prop_assert!((cheb_gamma(m, s.lambda_plus, &s) - 2.0).abs() < 1e-10);
    }
}

#[test]
fn bridges_are_distinct_and_valid() {
    for k in 1..=7 {
        let set = enumerate_bridges(k).unwrap();
        let mut seen: Vec<&[i8]> = set.bridges.iter().map(|b| b.steps()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), set.len());
        for b in &set.bridges {
            assert_eq!(b.steps().iter().map(|&s| s as i32).sum::<i32>(), 0);
            for (i, &s) in b.steps().iter().enumerate() {
                if i % 2 == 0 {
                    assert!(s <= 0);
                } else {
                    assert!(s >= 0);
                }
            }
        }
    }
}
