//! Standard sampling models used by the tests, examples and CLI.

use super::{Bound, DataSpace, GeometryError, HintFn, LogDensityFn, LogDensityModel, SamplerFn, Support};
use crate::oracle::{Interval, OracleRng};
use crate::real::Real;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// ln N(x | μ, σ).
pub fn ln_normal_pdf<T: Real>(x: T, mu: T, sigma: T) -> T {
    let z = (x - mu) / sigma;
    -T::lit(0.5) * z * z - sigma.ln() - T::lit(0.5) * (T::lit(2.0) * T::PI()).ln()
}

fn gaussian_hints<T: Real>(center: T, scale: T) -> Vec<T> {
    [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&k| center + scale * T::lit(k))
        .collect()
}

/// N(x | μ, σ) with known σ; parameter α = μ.
pub fn gaussian_location<T: Real>(sigma: T) -> Result<LogDensityModel<T>, GeometryError> {
    if !(sigma > T::zero()) {
        return Err(GeometryError::InvalidModel(format!("sigma = {sigma} must be positive")));
    }
    let ld: LogDensityFn<T> = Arc::new(move |x: &[T], a: &[T]| ln_normal_pdf(x[0], a[0], sigma));
    let hints: HintFn<T> = Arc::new(move |a: &[T]| vec![gaussian_hints(a[0], sigma)]);
    LogDensityModel::new(
        "gaussian-location",
        1,
        ld,
        Support::new(vec![Bound::real_line()]),
        DataSpace::Continuous {
            axes: vec![Interval::real_line()],
            hints: Some(hints),
        },
    )
}

/// N(x | μ, σ) with α = (μ, σ).
pub fn gaussian<T: Real>() -> Result<LogDensityModel<T>, GeometryError> {
    let ld: LogDensityFn<T> = Arc::new(|x: &[T], a: &[T]| ln_normal_pdf(x[0], a[0], a[1]));
    let hints: HintFn<T> = Arc::new(|a: &[T]| vec![gaussian_hints(a[0], a[1].abs())]);
    LogDensityModel::new(
        "gaussian",
        2,
        ld,
        Support::new(vec![Bound::real_line(), Bound::positive()]),
        DataSpace::Continuous {
            axes: vec![Interval::real_line()],
            hints: Some(hints),
        },
    )
}

/// Gaussian (μ, σ) with Monte-Carlo expectations over `draws` samples.
pub fn gaussian_sampled<T: Real>(draws: usize) -> Result<LogDensityModel<T>, GeometryError> {
    let ld: LogDensityFn<T> = Arc::new(|x: &[T], a: &[T]| ln_normal_pdf(x[0], a[0], a[1]));
    let sampler: SamplerFn<T> = Arc::new(|a: &[T], rng: &mut OracleRng| {
        let z: f64 = StandardNormal.sample(rng);
        vec![a[0] + a[1] * T::lit(z)]
    });
    LogDensityModel::new(
        "gaussian-sampled",
        2,
        ld,
        Support::new(vec![Bound::real_line(), Bound::positive()]),
        DataSpace::Sampled { sampler, draws },
    )
}

/// Exponential density λ e^{−λx} on x ≥ 0; α = λ.
pub fn exponential_rate<T: Real>() -> Result<LogDensityModel<T>, GeometryError> {
    let ld: LogDensityFn<T> = Arc::new(|x: &[T], a: &[T]| {
        if x[0] < T::zero() {
            T::neg_infinity()
        } else {
            a[0].ln() - a[0] * x[0]
        }
    });
    let hints: HintFn<T> = Arc::new(|a: &[T]| {
        vec![[0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|&k| T::lit(k) / a[0])
            .collect()]
    });
    LogDensityModel::new(
        "exponential-rate",
        1,
        ld,
        Support::new(vec![Bound::positive()]),
        DataSpace::Continuous {
            axes: vec![Interval::positive()],
            hints: Some(hints),
        },
    )
}

/// Bernoulli(θ) on {0, 1}; α = θ.
pub fn bernoulli<T: Real>() -> Result<LogDensityModel<T>, GeometryError> {
    let ld: LogDensityFn<T> = Arc::new(|x: &[T], a: &[T]| {
        let t = a[0];
        if x[0] > T::lit(0.5) {
            t.ln()
        } else {
            (-t).ln_1p()
        }
    });
    LogDensityModel::new(
        "bernoulli",
        1,
        ld,
        Support::new(vec![Bound::open(T::zero(), T::one())]),
        DataSpace::Discrete(vec![vec![T::zero()], vec![T::one()]]),
    )
}

fn simplex_support<T: Real>(free: usize) -> Support<T> {
    Support::new(vec![Bound::open(T::zero(), T::one()); free])
        .with_constraint(Arc::new(|a: &[T]| a.iter().copied().sum::<T>() < T::one()))
}

/// Multinomial with `cells` cells and `trials` trials. α holds the first
/// cells−1 probabilities; data are count vectors of length `cells`.
pub fn multinomial<T: Real>(cells: usize, trials: usize) -> Result<LogDensityModel<T>, GeometryError> {
    if cells < 2 || trials == 0 {
        return Err(GeometryError::InvalidModel(
            "multinomial needs >= 2 cells and >= 1 trial".into(),
        ));
    }
    let mut points = Vec::new();
    let mut current = vec![0usize; cells];
    compositions(trials, 0, &mut current, &mut points);
    let ln_fact = |k: usize| crate::specfun::ln_gamma_unchecked(T::of(k + 1));
    let ln_n_fact = ln_fact(trials);
    let ld: LogDensityFn<T> = Arc::new(move |x: &[T], a: &[T]| {
        let last = T::one() - a.iter().copied().sum::<T>();
        let mut acc = ln_n_fact;
        for (i, &xi) in x.iter().enumerate() {
            let k = xi.to_usize().unwrap_or(0);
            let theta = if i < a.len() { a[i] } else { last };
            acc -= ln_fact(k);
            if k > 0 {
                acc += T::of(k) * theta.ln();
            }
        }
        acc
    });
    let points = points
        .into_iter()
        .map(|c: Vec<usize>| c.into_iter().map(T::of).collect())
        .collect();
    LogDensityModel::new(
        format!("multinomial-{cells}x{trials}"),
        cells - 1,
        ld,
        simplex_support(cells - 1),
        DataSpace::Discrete(points),
    )
}

fn compositions(left: usize, at: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if at + 1 == current.len() {
        current[at] = left;
        out.push(current.clone());
        return;
    }
    for k in 0..=left {
        current[at] = k;
        compositions(left - k, at + 1, current, out);
    }
}
