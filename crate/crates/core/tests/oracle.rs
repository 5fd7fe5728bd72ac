use covprior::oracle::*;
use covprior::specfun::log_gamma;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use std::f64::consts::PI;

fn q(rel: f64) -> IntegrationSpec<f64> {
    IntegrationSpec::quadrature(rel)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[test]
fn integral_of_x_on_unit_interval() {
    let e = integrate_1d(|x: f64| x, 0.0, 1.0, &q(1e-12)).unwrap();
    assert!((e.value - 0.5).abs() < 1e-12);
    assert_eq!(e.kind, ErrorKind::ErrorBound);
}

#[test]
fn standard_normal_integrates_to_one() {
    let e = integrate_1d(normal_pdf, f64::NEG_INFINITY, f64::INFINITY, &q(1e-12)).unwrap();
    assert!((e.value - 1.0).abs() < 1e-10, "{}", e.value);
}

#[test]
fn dirichlet_half_normalization_by_simplex_sampling() {
    // ∫ ∏θᵢ^(−½) over the 2-simplex, importance-sampled from Dirichlet(¾,¾,¾)
    // so the weight ∏θᵢ^(−¼) has finite variance.
    let a = 0.75_f64;
    let g = Gamma::new(a, 1.0).unwrap();
    let sampler = |rng: &mut OracleRng| {
        let v: Vec<f64> = (0..3).map(|_| g.sample(rng)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let ln_b: f64 = 3.0 * log_gamma(a).unwrap() - log_gamma(3.0 * a).unwrap();
    let weight = |t: &Vec<f64>| (ln_b - 0.25 * t.iter().map(|x| x.ln()).sum::<f64>()).exp();
    let est = mc_expectation(sampler, weight, 1_000_000, 3).unwrap();
    let exact: f64 = (3.0 * log_gamma(0.5_f64).unwrap() - log_gamma(1.5).unwrap()).exp();
    assert!((exact - 2.0 * PI).abs() < 1e-12);
    assert!(
        (est.value - exact).abs() < 3.0 * est.error,
        "{} +/- {} vs {exact}",
        est.value,
        est.error
    );
}

#[test]
fn constant_expectation_is_exact() {
    let e = mc_expectation(|r: &mut OracleRng| r.random::<f64>(), |_| 1.0_f64, 50_000, 1).unwrap();
    assert_eq!(e.value, 1.0);
    assert_eq!(e.error, 0.0);
    assert_eq!(e.kind, ErrorKind::StdError);
}

#[test]
fn location_score_variance_is_one() {
    // ∂μ ln N(x|μ,1) = x − μ at μ = 0
    let e = mc_expectation(
        |r: &mut OracleRng| StandardNormal.sample(r),
        |x: &f64| x * x,
        1_000_000,
        42,
    )
    .unwrap();
    assert!((e.value - 1.0).abs() < 3.0 * e.error, "{} +/- {}", e.value, e.error);
}

#[test]
fn unit_variance_second_moment() {
    let e = mc_expectation(
        |r: &mut OracleRng| StandardNormal.sample(r),
        |x: &f64| x * x,
        1_000_000,
        9,
    )
    .unwrap();
    assert!((e.value - 1.0).abs() < 3.0 * e.error);
}

#[test]
fn too_few_draws_rejected() {
    assert!(matches!(
        mc_expectation(|_: &mut OracleRng| 0.0, |x: &f64| *x, 1, 0),
        Err(OracleError::InvalidSpec(_))
    ));
}

#[test]
fn monte_carlo_and_quadrature_agree_on_shared_integrands() {
    type Integrand = fn(&[f64]) -> f64;
    let fs: [(&str, Integrand); 3] = [
        ("xy", |v| v[0] * v[1]),
        ("exp", |v| (v[0] - 2.0 * v[1]).exp()),
        ("bump", |v| 1.0 / (1.0 + 4.0 * (v[0] * v[0] + v[1] * v[1]))),
    ];
    for dom in [
        Domain::Box(vec![Interval::new(0.0, 1.0), Interval::new(-1.0, 2.0)]),
        Domain::Simplex(2),
    ] {
        for (name, f) in fs {
            let a = integrate_nd(f, &dom, &q(1e-10)).unwrap();
            let b = integrate_nd(f, &dom, &IntegrationSpec::monte_carlo(400_000, 5)).unwrap();
            let tol = 3.0 * (a.error * a.error + b.error * b.error).sqrt();
            assert!(
                (a.value - b.value).abs() < tol,
                "{name} {dom:?}: {} vs {} ({tol})",
                a.value,
                b.value
            );
        }
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let spec = IntegrationSpec::monte_carlo(100_000, 77);
    let dom = Domain::Box(vec![Interval::new(0.0, 1.0); 3]);
    let f = |v: &[f64]| (v[0] * v[1] + v[2]).sin();
    let a = integrate_nd(f, &dom, &spec).unwrap();
    let b = integrate_nd(f, &dom, &spec).unwrap();
    assert_eq!(a, b);
    let c = integrate_nd(f, &dom, &spec.clone().with_seed(78)).unwrap();
    assert_ne!(a.value.to_bits(), c.value.to_bits());
    let qa = integrate_nd(f, &dom, &q(1e-8)).unwrap();
    let qb = integrate_nd(f, &dom, &q(1e-8)).unwrap();
    assert_eq!(qa, qb);
}

#[test]
fn monte_carlo_independent_of_worker_count() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                mc_expectation(
                    |r: &mut OracleRng| StandardNormal.sample(r),
                    |x: &f64| x.abs(),
                    300_000,
                    12,
                )
                .unwrap()
            })
    };
    let one = run(1);
    for t in [2, 3, 8] {
        assert_eq!(one, run(t));
    }
}

#[test]
fn hessian_of_gaussian_log_density() {
    let x = 0.7;
    let f = |a: &[f64]| -0.5 * ((x - a[0]) / a[1]).powi(2) - a[1].ln() - 0.5 * (2.0 * PI).ln();
    for (mu, s) in [(0.2, 1.3), (-1.0, 0.6), (3.0, 2.5)] {
        let h = finite_diff_hessian(&f, &[mu, s], &StepPolicy::default()).unwrap();
        let d = x - mu;
        let exact = [
            [-1.0 / (s * s), -2.0 * d / s.powi(3)],
            [-2.0 * d / s.powi(3), 1.0 / (s * s) - 3.0 * d * d / s.powi(4)],
        ];
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (h[(i, j)] - exact[i][j]).abs() < 1e-5,
                    "({i},{j}) {} vs {}",
                    h[(i, j)],
                    exact[i][j]
                );
            }
        }
        assert_eq!(h[(0, 1)], h[(1, 0)]);
    }
}

#[test]
fn hessian_of_square_and_constant() {
    let h = finite_diff_hessian(&|x: &[f64]| x[0] * x[0], &[0.0], &StepPolicy::default()).unwrap();
    assert!((h[(0, 0)] - 2.0).abs() < 1e-6);
    let c = finite_diff_hessian(&|_: &[f64]| 4.2, &[1.0, -2.0], &StepPolicy::default()).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert_eq!(c[(i, j)], 0.0);
        }
    }
}

#[test]
fn hessian_rejects_non_finite() {
    let r = finite_diff_hessian(&|x: &[f64]| x[0].ln(), &[0.0], &StepPolicy::default());
    assert!(r.is_err());
}

#[test]
fn invalid_specs_rejected() {
    let f = |x: f64| x;
    assert!(matches!(
        integrate_1d(f, 0.0, 1.0, &q(0.0)),
        Err(OracleError::InvalidSpec(_))
    ));
    assert!(matches!(
        integrate_1d(f, 0.0, 1.0, &q(1e-6).with_max_evals(0)),
        Err(OracleError::InvalidSpec(_))
    ));
}

#[test]
fn budget_exhaustion_carries_best_estimate() {
    let r = integrate_1d(
        |x: f64| x.sqrt().sin() / x.sqrt(),
        0.0,
        50.0,
        &q(1e-14).with_max_evals(60),
    );
    match r {
        Err(OracleError::ToleranceNotMet { value, .. }) => assert!(value.is_finite()),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn refinement_stays_within_previous_bound(c in 0.2f64..20.0, b in 0.5f64..6.0) {
        let f = |x: f64| 1.0 / (1.0 + (c * x).powi(2)) + (x * c).cos() * 0.3;
        let coarse = integrate_1d(f, 0.0, b, &q(1e-6)).unwrap();
        let fine = integrate_1d(f, 0.0, b, &q(5e-7)).unwrap();
        prop_assert!((fine.value - coarse.value).abs() <= coarse.error.max(1e-15));
    }

    #[test]
    fn std_error_non_negative(seed in any::<u64>(), n in 2usize..5000) {
        let e = mc_expectation(|r: &mut OracleRng| r.random::<f64>(), |x: &f64| x * x, n, seed).unwrap();
        prop_assert!(e.error >= 0.0);
        prop_assert!(e.value >= 0.0 && e.value <= 1.0);
    }
}
