use covprior::geometry::models::{exponential_rate, gaussian, gaussian_location, ln_normal_pdf, multinomial};
use covprior::geometry::{reparameterize, Reparameterization};
use covprior::inference::*;
use covprior::oracle::{IntegrationSpec, Interval};
use covprior::specfun::log_gamma;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn spec() -> IntegrationSpec<f64> {
    IntegrationSpec::quadrature(1e-10)
}

fn standardized(raw: &[f64]) -> Vec<Vec<f64>> {
    let n = raw.len() as f64;
    let m = raw.iter().sum::<f64>() / n;
    let s = (raw.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    raw.iter().map(|x| vec![(x - m) / s]).collect()
}

#[test]
fn flat_prior_gaussian_posterior_moments() {
    let m = gaussian_location(1.0_f64).unwrap();
    let grid = Grid::uniform(&[(-8.0, 8.0)]).unwrap();
    let post = posterior_on_grid(&m, &Prior::flat(), &[vec![0.0]], &grid).unwrap();
    assert!(post.mean()[0].abs() < 1e-4);
    assert!((post.covariance()[(0, 0)] - 1.0).abs() < 1e-4);
    let total: f64 = post.probabilities().iter().sum();
    assert!((total - 1.0).abs() < 1e-4);
    assert!(!post.leaks_mass());
    assert_eq!(post.scale, EvidenceScale::UpToConstant);
}

#[test]
fn narrow_grid_reports_mass_leak() {
    let m = gaussian_location(1.0_f64).unwrap();
    let grid = Grid::new(vec![GridAxis::linear(-1.0, 1.0, 65)]).unwrap();
    let post = posterior_on_grid(&m, &Prior::flat(), &[vec![0.0]], &grid).unwrap();
    assert!(post.leaks_mass());
}

#[test]
fn grid_rejects_bad_axes() {
    assert!(matches!(
        Grid::new(vec![GridAxis::linear(0.0, 1.0, 64)]),
        Err(InferenceError::InvalidGrid(_))
    ));
    assert!(matches!(
        Grid::new(vec![GridAxis::log(0.0, 1.0, 65)]),
        Err(InferenceError::InvalidGrid(_))
    ));
    assert!(Grid::<f64>::new(vec![]).is_err());
}

#[test]
fn empty_support_on_grid() {
    // grid entirely outside σ > 0
    let m = gaussian().unwrap();
    let grid = Grid::new(vec![GridAxis::linear(-1.0, 1.0, 5), GridAxis::linear(-2.0, -1.0, 5)]).unwrap();
    let r = posterior_on_grid(&m, &Prior::flat(), &[vec![0.0]], &grid);
    assert!(matches!(r, Err(InferenceError::EmptySupport(_))));
}

/// ln of Γ((n−1)/2) / (2 √(nⁿ π^{n−1})).
fn ln_z1(n: usize) -> f64 {
    let n = n as f64;
    log_gamma((n - 1.0) / 2.0).unwrap() - 2f64.ln() - 0.5 * (n * n.ln() + (n - 1.0) * PI.ln())
}

#[test]
fn scale_invariant_prior_evidence_is_flagged_and_matches_closed_form() {
    let data = standardized(&[0.3, -1.2, 0.8, 2.0, -0.5]);
    let m = gaussian().unwrap();
    let prior = Prior::improper(Arc::new(|a: &[f64]| -a[1].ln()));
    let dom = [Interval::real_line(), Interval::positive()];
    let hints = [vec![-1.0, -0.3, 0.0, 0.3, 1.0], vec![0.3, 0.6, 1.0, 1.5, 3.0]];
    let z =
        marginal_likelihood_with_hints(&m, &prior, &data, &dom, &hints, &IntegrationSpec::quadrature(1e-9)).unwrap();
    assert_eq!(z.scale, EvidenceScale::UpToConstant);
    assert!((z.ln_value - ln_z1(5)).abs() < 1e-7, "{} vs {}", z.ln_value, ln_z1(5));
    assert!((ln_z1(2).exp() - 0.25).abs() < 1e-15);
}

#[test]
fn conjugate_gaussian_evidence() {
    let m = gaussian_location(1.0_f64).unwrap();
    for (x, b, a) in [(0.0, 0.0, 1.0), (1.3, -0.4, 0.5), (-2.0, 1.0, 3.0)] {
        let prior = Prior::proper(Arc::new(move |mu: &[f64]| ln_normal_pdf(mu[0], b, a)));
        let z = marginal_likelihood(&m, &prior, &[vec![x]], &[Interval::real_line()], &spec()).unwrap();
        let s2 = 1.0 + a * a;
        let exact = (-(x - b) * (x - b) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
        assert_eq!(z.scale, EvidenceScale::Absolute);
        assert!((z.value() / exact - 1.0).abs() < 1e-8);
    }
}

#[test]
fn zero_width_support_is_empty() {
    let m = gaussian_location(1.0_f64).unwrap();
    let r = marginal_likelihood(&m, &Prior::flat(), &[vec![0.0]], &[Interval::new(1.0, 1.0)], &spec());
    assert!(matches!(r, Err(InferenceError::EmptySupport(_))));
}

#[test]
fn improper_evidence_that_diverges() {
    // flat prior on σ with one datum: ∫ N(0|μ,σ) dμ dσ = ∫ dσ diverges
    let m = gaussian().unwrap();
    let r = marginal_likelihood(
        &m,
        &Prior::flat(),
        &[vec![0.0]],
        &[Interval::real_line(), Interval::positive()],
        &IntegrationSpec::quadrature(1e-8).with_max_evals(200_000),
    );
    assert!(matches!(r, Err(InferenceError::Divergent(_))), "{r:?}");
}

#[test]
fn multinomial_jeffreys_posterior_mean() {
    let m = multinomial(3, 8).unwrap();
    let prior = Prior::jeffreys(&m, &spec());
    let grid = Grid::new(vec![GridAxis::linear(0.0, 1.0, 257), GridAxis::linear(0.0, 1.0, 257)]).unwrap();
    let post = posterior_on_grid(&m, &prior, &[vec![2.0, 1.0, 5.0]], &grid).unwrap();
    let mean = post.mean();
    assert!((mean[0] / (2.5 / 9.5) - 1.0).abs() < 1e-3, "{mean:?}");
    assert!((mean[1] / (1.5 / 9.5) - 1.0).abs() < 1e-3, "{mean:?}");
}

#[test]
fn posterior_is_covariant_under_reparameterization() {
    let e = exponential_rate().unwrap();
    let data = vec![vec![0.7], vec![1.9], vec![0.2]];
    let spec = spec();
    let pa = Prior::jeffreys(&e, &spec);
    let map = Reparameterization::monotone_1d(|a: f64| a.ln(), |b: f64| b.exp(), |b: f64| b.exp());
    let eb = reparameterize(&e, &map).unwrap();
    let pb = Prior::jeffreys(&eb, &spec);
    let (lo, hi) = (-5.0_f64, 3.0_f64);
    let post_b = posterior_on_grid(&eb, &pb, &data, &Grid::uniform(&[(lo, hi)]).unwrap()).unwrap();
    let post_a = posterior_on_grid(
        &e,
        &pa,
        &data,
        &Grid::new(vec![GridAxis::log(lo.exp(), hi.exp(), 257)]).unwrap(),
    )
    .unwrap();
    // push the α density forward: p_β(β) = p_α(e^β) e^β
    let tv = post_b.total_variation_to(|b: &[f64]| {
        let a = b[0].exp();
        (pa.log_density(&[a]) + e.log_likelihood(&data, &[a]) - post_a.log_evidence).exp() * a
    });
    assert!(tv < 1e-4, "{tv}");
}

#[test]
fn evidence_is_independent_of_coordinates() {
    let e = exponential_rate().unwrap();
    let data = vec![vec![0.7], vec![1.1]];
    // the Jeffreys density carries finite-difference noise near 1e-8
    let spec = IntegrationSpec::quadrature(1e-7);
    let (lo, hi) = (0.5_f64, 4.0_f64);
    let pa = Prior::jeffreys(&e, &spec)
        .normalized_on(&[Interval::new(lo, hi)], &spec)
        .unwrap();
    let za = marginal_likelihood(&e, &pa, &data, &[Interval::new(lo, hi)], &spec).unwrap();
    let map = Reparameterization::monotone_1d(|a: f64| a.ln(), |b: f64| b.exp(), |b: f64| b.exp());
    let eb = reparameterize(&e, &map).unwrap();
    let bdom = [Interval::new(lo.ln(), hi.ln())];
    let pb = Prior::jeffreys(&eb, &spec).normalized_on(&bdom, &spec).unwrap();
    let zb = marginal_likelihood(&eb, &pb, &data, &bdom, &spec).unwrap();
    assert_eq!(za.scale, EvidenceScale::Absolute);
    assert!(
        (za.value() / zb.value() - 1.0).abs() < 1e-6,
        "{} {}",
        za.value(),
        zb.value()
    );
}

fn fixed(ln_z: f64) -> EvidenceFn<f64, ()> {
    Box::new(move |_: &()| Ok(Evidence::absolute(ln_z)))
}

#[test]
fn identical_models_split_evenly() {
    let ens = ModelEnsemble::uniform(vec![("a".into(), fixed(-3.0)), ("b".into(), fixed(-3.0))]).unwrap();
    let p = model_posterior(&ens, &()).unwrap();
    assert!((p.get("a").unwrap() - 0.5).abs() < 1e-15);
    assert!((p.get("b").unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn improper_evidence_cannot_enter_comparison() {
    let improper: EvidenceFn<f64, ()> = Box::new(|_: &()| Ok(Evidence::up_to_constant(0.0)));
    let ens = ModelEnsemble::uniform(vec![("proper".into(), fixed(-1.0)), ("improper".into(), improper)]).unwrap();
    match model_posterior(&ens, &()) {
        Err(InferenceError::IncomparableEvidence { label }) => assert_eq!(label, "improper"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn ensemble_validation() {
    let dup = ModelEnsemble::uniform(vec![("a".into(), fixed(0.0)), ("a".into(), fixed(0.0))]);
    assert!(matches!(dup, Err(InferenceError::InvalidEnsemble(_))));
    let bad = ModelEnsemble::new(vec![EnsembleMember {
        label: "a".into(),
        evidence: fixed(0.0),
        prior_weight: 0.7,
    }]);
    assert!(matches!(bad, Err(InferenceError::InvalidEnsemble(_))));
    let all_zero = ModelEnsemble::uniform(vec![("a".into(), fixed(f64::NEG_INFINITY))]).unwrap();
    assert!(matches!(
        model_posterior(&all_zero, &()),
        Err(InferenceError::EmptySupport(_))
    ));
}

#[test]
fn averaging_examples() {
    let s: Vec<Summary<f64>> = vec![Summary::scalar(1.0, 0.5), Summary::scalar(3.0, 2.0)];
    let labels = vec!["a".to_string(), "b".to_string()];
    let delta = ModelPosterior::delta(labels.clone(), 1);
    assert_eq!(model_average(&s, &delta).unwrap(), s[1]);
    let half = ModelPosterior {
        labels,
        weights: vec![0.5, 0.5],
        ln_evidence: vec![0.0, 0.0],
    };
    let Summary::Moments { mean, covariance } = model_average(&s, &half).unwrap() else {
        panic!()
    };
    assert_eq!(mean, vec![2.0]);
    // ½(0.5 + 1) + ½(2 + 9) − 4
    assert!((covariance[0][0] - 2.25).abs() < 1e-15);
    let same = vec![Summary::scalar(1.0, 0.5); 2];
    assert_eq!(model_average(&same, &half).unwrap(), same[0]);
    let mixed = vec![
        Summary::scalar(1.0, 0.5),
        Summary::Density {
            nodes: vec![vec![0.0]],
            values: vec![1.0],
        },
    ];
    assert!(matches!(model_average(&mixed, &half), Err(InferenceError::Shape(_))));
    let dims = vec![
        Summary::scalar(1.0, 0.5),
        Summary::Moments {
            mean: vec![0.0, 0.0],
            covariance: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        },
    ];
    assert!(matches!(model_average(&dims, &half), Err(InferenceError::Shape(_))));
}

#[test]
fn density_mixture_on_a_hyper_grid() {
    // N(μ | k, 1) averaged over a flat hyper-posterior on k ∈ [−1, 1]
    let hyper = GriddedPosterior::from_log_values(
        Grid::new(vec![GridAxis::linear(-1.0, 1.0, 65)]).unwrap(),
        vec![0.0; 65],
        EvidenceScale::Absolute,
    )
    .unwrap();
    let nodes: Vec<Vec<f64>> = (-4..=4).map(|i| vec![i as f64]).collect();
    let avg = average_over_grid(&hyper, |k| Summary::Density {
        nodes: nodes.clone(),
        values: nodes.iter().map(|x| ln_normal_pdf(x[0], k[0], 1.0).exp()).collect(),
    })
    .unwrap();
    let Summary::Density { values, .. } = avg else { panic!() };
    // ∫_{-1}^{1} N(0|k,1) dk / 2 = Φ(1) − ½
    assert!((values[4] - 0.341_344_746_068_542_9).abs() < 1e-8);
}

#[test]
fn hyper_posterior_rejects_improper_evidence() {
    let r = hyper_posterior_1d(
        |_| Ok(Evidence::up_to_constant(0.0)),
        &Prior::flat(),
        GridAxis::linear(0.0, 1.0, 5),
    );
    assert!(matches!(r, Err(InferenceError::IncomparableEvidence { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_ignore_a_common_factor(zs in proptest::collection::vec(-50.0..50.0f64, 1..8), c in -300.0..300.0f64) {
        let make = |shift: f64| {
            let members = zs.iter().enumerate().map(|(i, &z)| (format!("m{i}"), fixed(z + shift))).collect();
            model_posterior(&ModelEnsemble::uniform(members).unwrap(), &()).unwrap()
        };
        let (a, b) = (make(0.0), make(c));
        let total: f64 = a.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!(*x >= 0.0);
        }
    }

    #[test]
    fn uniform_average_of_identical_summaries(m in -10.0..10.0f64, v in 0.01..10.0f64, k in 1usize..6) {
        let s = vec![Summary::scalar(m, v); k];
        let w = ModelPosterior { labels: (0..k).map(|i| i.to_string()).collect(), weights: vec![1.0 / k as f64; k], ln_evidence: vec![0.0; k] };
        let Summary::Moments { mean, covariance } = model_average(&s, &w).unwrap() else { panic!() };
        prop_assert!((mean[0] - m).abs() < 1e-12 * (1.0 + m.abs()));
        prop_assert!((covariance[0][0] - v).abs() < 1e-10 * (1.0 + m * m));
    }
}
