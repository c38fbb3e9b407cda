use partrace::ensembles::semicircle_quantiles;
use partrace::exact;
use partrace::process::{self, TimeGrid};
use partrace::sampling::{self, Beta};
use partrace::stats;
use partrace::testfn::{self, TestFunction};
use partrace::Seed;
use proptest::prelude::*;

fn beta_strategy() -> impl Strategy<Value = Beta> {
    prop_oneof![Just(Beta::Orthogonal), Just(Beta::Unitary)]
}

fn poly_strategy(max_degree: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 2..=max_degree + 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_identity(seed in any::<u64>(), n in 1usize..40, t in 0.0f64..=1.0, beta in beta_strategy()) {
        let u = sampling::sample_haar(n, beta, Seed::new(seed, 0)).unwrap();
        let w = process::partial_weights(&u, t);
        let total: f64 = w.iter().sum();
        prop_assert!((total - process::floor_count(t, n) as f64).abs() <= 1e-9 * n as f64);
        prop_assert!(w.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn sheet_vanishes_on_boundary(seed in any::<u64>(), n in 1usize..24, beta in beta_strategy()) {
        let u = sampling::sample_haar(n, beta, Seed::new(seed, 1)).unwrap();
        let g = TimeGrid::uniform(9).unwrap();
        let sheet = process::bivariate_sheet(&u, &g, &g);
        prop_assert!(sheet.boundary_max() <= 1e-9 * n as f64);
    }

    #[test]
    fn quenched_endpoints_are_zero(seed in any::<u64>(), n in 1usize..24, c in prop::collection::vec(-2.0f64..2.0, 1..4)) {
        let u = sampling::sample_haar(n, Beta::Unitary, Seed::new(seed, 2)).unwrap();
        let lam = semicircle_quantiles(n).unwrap();
        let f = TestFunction::polynomial(c).unwrap();
        let g = TimeGrid::uniform(11).unwrap();
        let x = process::partial_trace_path(&u, &lam, &f, &g).unwrap();
        let w = process::center_quenched(&x, *x.values.last().unwrap()).unwrap();
        prop_assert_eq!(w.values[0], 0.0);
        prop_assert_eq!(*w.values.last().unwrap(), 0.0);
    }

    #[test]
    fn sigma0_is_shift_invariant(c in poly_strategy(6), shift in -5.0f64..5.0, beta in beta_strategy()) {
        let f = TestFunction::polynomial(c.clone()).unwrap();
        let mut shifted = c;
        shifted[0] += shift;
        let g = TestFunction::polynomial(shifted).unwrap();
        let a = testfn::semicircle_summary(&f, beta).unwrap();
        let b = testfn::semicircle_summary(&g, beta).unwrap();
        prop_assert!((a.sigma0_sq - b.sigma0_sq).abs() <= 1e-8 * a.sigma0_sq.max(1.0));
        prop_assert!(a.sigma0_sq >= 0.0);
    }

    #[test]
    fn sigma1_routes_agree(c in poly_strategy(10), beta in beta_strategy()) {
        let f = TestFunction::polynomial(c).unwrap();
        let a = testfn::sigma1_sq_quadrature(&f, beta).unwrap();
        let b = testfn::sigma1_sq_chebyshev(&f, beta).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn exact_covariance_symmetric_and_vanishes_at_one(
        n in 2usize..200, s in 0.0f64..=1.0, t in 0.0f64..=1.0, bp in 0.1f64..3.0,
        s1 in -10.0f64..10.0, extra in 0.0f64..10.0,
    ) {
        let s2 = s1 * s1 / n as f64 + extra;
        let a = exact::exact_cov_partial_trace(s, t, n, bp, s1, s2).unwrap();
        let b = exact::exact_cov_partial_trace(t, s, n, bp, s1, s2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        let end = exact::exact_cov_partial_trace(1.0, 1.0, n, bp, s1, s2).unwrap();
        prop_assert!(end.abs() <= 1e-12 * (1.0 + s1 * s1 + s2));
    }

    #[test]
    fn limit_matches_sigma0(s in 0.0f64..=1.0, t in 0.0f64..=1.0, c in poly_strategy(4), beta in beta_strategy()) {
        let f = TestFunction::polynomial(c).unwrap();
        let sum = testfn::semicircle_summary(&f, beta).unwrap();
        let lim = exact::limit_of_exact_cov(s, t, beta.prime(), sum.nu_f, sum.nu_f2).unwrap();
        prop_assert!((lim - sum.sigma0_sq * (s.min(t) - s * t)).abs() <= 1e-9 * sum.sigma0_sq.max(1.0));
    }

    #[test]
    fn verdict_is_monotone_in_k(
        cols in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 20), 3),
        offset in -1.0f64..1.0, k in 0.5f64..6.0, extra in 0.0f64..4.0,
    ) {
        let s = stats::summarize_columns(vec![0.25, 0.5, 0.75], &cols).unwrap();
        let reference = |a: f64, b: f64| a.min(b) - a * b + offset;
        let lo = stats::compare_cov("m", &s, reference, k).unwrap();
        let hi = stats::compare_cov("m", &s, reference, k + extra).unwrap();
        prop_assert!(!lo.pass || hi.pass);
    }

    #[test]
    fn summary_is_permutation_invariant(
        cols in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 12), 2),
        rot in 0usize..12,
    ) {
        let a = stats::summarize_columns(vec![0.5, 1.0], &cols).unwrap();
        let rotated: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| { let mut c = c.clone(); c.rotate_left(rot); c.reverse(); c })
            .collect();
        let b = stats::summarize_columns(vec![0.5, 1.0], &rotated).unwrap();
        for i in 0..2 {
            prop_assert!((a.mean[i] - b.mean[i]).abs() <= 1e-12);
            for j in 0..2 {
                prop_assert!((a.cov[i][j] - b.cov[i][j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn test_function_syntax_round_trips(c in poly_strategy(5)) {
        let f = TestFunction::polynomial(c).unwrap();
        let g: TestFunction = f.to_string().parse().unwrap();
        prop_assert_eq!(f, g);
    }

    #[test]
    fn floor_count_is_monotone(n in 1usize..5000, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(process::floor_count(lo, n) <= process::floor_count(hi, n));
        prop_assert!(process::floor_count(hi, n) <= n);
    }
}

#[test]
fn semicircle_cdf_is_monotone() {
    let m = 10_000;
    let mut prev = testfn::semicircle_cdf(-2.0);
    assert_eq!(prev, 0.0);
    for i in 1..=m {
        let x = -2.0 + 4.0 * i as f64 / m as f64;
        let v = testfn::semicircle_cdf(x);
        assert!(v >= prev, "at {x}");
        prev = v;
    }
    assert!((prev - 1.0).abs() < 1e-15);
}
