//! Stein's problem: m unit-variance Gaussian observations xᵢ ~ N(μᵢ, 1),
//! with μᵢ ~ N(b, a) under data models indexed by (b, a) and the
//! Jeffreys hyper-prior π(b, a) ∝ a/√((1+a²)³).
//!
//! Averages over (b, a) reduce to moments of w = 1/(1+a²), whose
//! hyper-posterior moments are ratios of lower incomplete gammas.

use super::{CaseResult, CaseStudyError, CaseStudyReport, Table};
use crate::geometry::models::ln_normal_pdf;
use crate::oracle::{integrate_nd_with_hints, Domain, IntegrationSpec, Interval, OracleEstimate};
use crate::specfun::{gen_incomplete_gamma, ln_lower_gamma_scaled};
use crate::Real;
use num_traits::Num;

#[derive(Debug, Clone, PartialEq)]
pub struct SteinInput<T> {
    pub x: Vec<T>,
}

impl<T: Real> SteinInput<T> {
    pub fn new(x: Vec<T>) -> CaseResult<Self> {
        if x.is_empty() {
            return Err(CaseStudyError::Domain("need at least one observation".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CaseStudyError::Domain("observations must be finite".into()));
        }
        Ok(Self { x })
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn mean(&self) -> T {
        self.x.iter().copied().sum::<T>() / T::of(self.m())
    }

    /// Biased sample variance s².
    pub fn variance(&self) -> T {
        let xb = self.mean();
        self.x.iter().map(|&v| (v - xb) * (v - xb)).sum::<T>() / T::of(self.m())
    }

    /// Mean of the squares, (1/m)Σxᵢ².
    pub fn mean_square(&self) -> T {
        self.x.iter().map(|&v| v * v).sum::<T>() / T::of(self.m())
    }
}

/// Posterior mean and variance of θ² = (1/m)Σμᵢ² under the flat prior on μ.
pub fn flat_model_moments<T: Real>(input: &SteinInput<T>) -> (T, T) {
    let x2 = input.mean_square();
    let two = T::lit(2.0);
    (T::one() + x2, two * (T::one() + two * x2) / T::of(input.m()))
}

/// Sampling mean of the flat-prior estimate 1 + x̄² given the true θ².
pub fn flat_estimate_sampling_mean<T: Real>(theta2: T) -> T {
    T::lit(2.0) + theta2
}

fn check_hyper<T: Real>(a: T, s2: T, m: usize) -> CaseResult<()> {
    if m == 0 {
        return Err(CaseStudyError::Domain("m must be at least 1".into()));
    }
    if !(a > T::zero()) || !a.is_finite() {
        return Err(CaseStudyError::Domain(format!("a = {a} must be positive")));
    }
    if !(s2 >= T::zero()) || !s2.is_finite() {
        return Err(CaseStudyError::Domain(format!("s2 = {s2} must be non-negative")));
    }
    Ok(())
}

/// ln p(b, a | x): the hyper-posterior of the data model given the sample
/// mean, biased variance and size.
pub fn ln_hyper_posterior<T: Real>(b: T, a: T, xbar: T, s2: T, m: usize) -> CaseResult<T> {
    check_hyper(a, s2, m)?;
    let mf = T::of(m);
    let half = T::lit(0.5);
    let l = ln_lower_gamma_scaled(mf * half, mf * s2 * half)?;
    let u = T::one() + a * a;
    Ok(half * (T::lit(2.0) * mf).ln() - l + a.ln()
        - half * T::PI().ln()
        - (mf + T::lit(3.0)) * half * u.ln()
        - mf * (s2 + (b - xbar) * (b - xbar)) / (T::lit(2.0) * u))
}

pub fn stein_hyper_posterior<T: Real>(b: T, a: T, xbar: T, s2: T, m: usize) -> CaseResult<T> {
    Ok(ln_hyper_posterior(b, a, xbar, s2, m)?.exp())
}

/// The single-observation hyper-posterior a/(√(2π)(1+a²)²)·exp[−(b−x)²/(2(1+a²))].
pub fn hyper_posterior_single<T: Real>(b: T, a: T, x: T) -> CaseResult<T> {
    check_hyper(a, T::zero(), 1)?;
    let u = T::one() + a * a;
    Ok(a / (T::TAU().sqrt() * u * u) * (-(b - x) * (b - x) / (T::lit(2.0) * u)).exp())
}

/// Mode of the single-observation hyper-posterior: (x, 1/√3).
pub fn hyper_mode_single<T: Real>(x: T) -> (T, T) {
    (x, T::one() / T::lit(3.0).sqrt())
}

/// E[wᵏ] under the hyper-posterior, w = 1/(1+a²).
pub fn shrinkage_moment<T: Real>(k: usize, s2: T, m: usize) -> CaseResult<T> {
    let mf = T::of(m);
    let half = T::lit(0.5);
    let c = mf * s2 * half;
    Ok((ln_lower_gamma_scaled(mf * half + T::of(k), c)? - ln_lower_gamma_scaled(mf * half, c)?).exp())
}

fn check_average<T: Real>(s2: T, m: usize) -> CaseResult<()> {
    super::need_min("model average", "m", m, 2)?;
    if !(s2 > T::zero()) || !s2.is_finite() {
        return Err(CaseStudyError::Domain(format!("s2 = {s2} must be positive")));
    }
    Ok(())
}

/// Model-averaged posterior mean of μᵢ: xᵢ − (xᵢ − x̄)E[w].
pub fn stein_averaged_mu<T: Real>(x_i: T, xbar: T, s2: T, m: usize) -> CaseResult<T> {
    check_average(s2, m)?;
    Ok(x_i - (x_i - xbar) * shrinkage_moment(1, s2, m)?)
}

/// Model-averaged posterior second moment of μᵢ.
pub fn stein_averaged_mu2<T: Real>(x_i: T, xbar: T, s2: T, m: usize) -> CaseResult<T> {
    check_average(s2, m)?;
    let d = x_i - xbar;
    let g1 = shrinkage_moment(1, s2, m)?;
    let g2 = shrinkage_moment(2, s2, m)?;
    let inv_m = T::one() / T::of(m);
    Ok(x_i * x_i + T::one() - g1 * (T::one() + T::lit(2.0) * x_i * d - inv_m) + d * d * g2)
}

/// Model-averaged posterior mean of θ² = (1/m)Σμᵢ².
pub fn stein_averaged_theta2<T: Real>(mean_square: T, s2: T, m: usize) -> CaseResult<T> {
    check_average(s2, m)?;
    let g1 = shrinkage_moment(1, s2, m)?;
    let g2 = shrinkage_moment(2, s2, m)?;
    let inv_m = T::one() / T::of(m);
    let two = T::lit(2.0);
    Ok(T::one() + mean_square - g1 * (T::one() - inv_m + two * s2) + g2 * s2)
}

/// The same average written as 1 + x̄² + 2A/B with incomplete gammas.
pub fn stein_averaged_theta2_gamma_form(mean_square: f64, s2: f64, m: usize) -> CaseResult<f64> {
    check_average(s2, m)?;
    let mf = m as f64;
    let c = mf * s2 / 2.0;
    let upper = |a: f64| gen_incomplete_gamma(a, c, f64::INFINITY).map(|r| r.value);
    let full = |a: f64| crate::specfun::gamma(a);
    let a = (3.0 - 2.0 * mf * s2) * full(mf / 2.0 + 1.0)?
        - 2.0 * upper(mf / 2.0 + 2.0)?
        - (1.0 - mf - 2.0 * mf * s2) * upper(mf / 2.0 + 1.0)?;
    let b = mf * mf * s2 * gen_incomplete_gamma(mf / 2.0, 0.0, c)?.value;
    Ok(1.0 + mean_square + 2.0 * a / b)
}

/// E(μᵢ² | x, b, a) for the data model (b, a), written in terms of a².
/// Exact for rational arguments.
pub fn conditional_mu2<N: Num + Clone>(x: N, b: N, a2: N) -> N {
    let one = N::one();
    let two = one.clone() + one.clone();
    let u = one.clone() + a2.clone();
    let num = b.clone() * b.clone()
        + a2.clone() * (one.clone() + two * b * x.clone())
        + a2.clone() * a2 * (one + x.clone() * x);
    num / (u.clone() * u)
}

/// Posterior of μᵢ given the data model (b, a): N(μ | (a²x+b)/(1+a²), a/√(1+a²)).
pub fn conditional_posterior<T: Real>(mu: T, x: T, b: T, a: T) -> T {
    let u = T::one() + a * a;
    ln_normal_pdf(mu, (a * a * x + b) / u, a / u.sqrt()).exp()
}

/// The gate prior U(μ; b−√3a, b+√3a), which shares mean b and sd a with the
/// Gaussian prior used in the averages.
pub fn gate_prior_density<T: Real>(mu: T, b: T, a: T) -> CaseResult<T> {
    check_hyper(a, T::zero(), 1)?;
    let half_width = T::lit(3.0).sqrt() * a;
    if (mu - b).abs() <= half_width {
        Ok(T::one() / (T::lit(2.0) * half_width))
    } else {
        Ok(T::zero())
    }
}

/// Both sides of N(x|μ,σ)N(μ|b,a) = N(x|b,√(a²+σ²))·N(μ | (a²x+bσ²)/(a²+σ²), aσ/√(a²+σ²)).
pub fn factorization_sides<T: Real>(x: T, mu: T, sigma: T, b: T, a: T) -> (T, T) {
    let lhs = (ln_normal_pdf(x, mu, sigma) + ln_normal_pdf(mu, b, a)).exp();
    let v = a * a + sigma * sigma;
    let rhs = (ln_normal_pdf(x, b, v.sqrt())
        + ln_normal_pdf(mu, (a * a * x + b * sigma * sigma) / v, a * sigma / v.sqrt()))
    .exp();
    (lhs, rhs)
}

/// ∫∫ g(b, a) p(b, a | x) db da by nested quadrature (a outer, b inner).
pub fn average_over_hyperparameters<T: Real>(
    input: &SteinInput<T>,
    g: impl Fn(T, T) -> T + Sync,
    spec: &IntegrationSpec<T>,
) -> CaseResult<OracleEstimate<T>> {
    let (xbar, s2, m) = (input.mean(), input.variance(), input.m());
    // Checked once so the integrand can assume valid arguments.
    ln_hyper_posterior(xbar, T::one(), xbar, s2, m)?;
    let f = |v: &[T]| {
        let (a, b) = (v[0], v[1]);
        if a <= T::zero() {
            return T::zero();
        }
        let lp = ln_hyper_posterior(b, a, xbar, s2, m).unwrap_or(T::neg_infinity());
        g(b, a) * lp.exp()
    };
    let dom = Domain::Box(vec![Interval::positive(), Interval::real_line()]);
    let hints = vec![
        vec![T::one() / T::lit(3.0).sqrt(), T::one(), s2.sqrt().max(T::lit(0.1))],
        vec![xbar],
    ];
    Ok(integrate_nd_with_hints(f, &dom, &hints, spec)?)
}

/// The posterior of μ for a single observation x, averaged over the data
/// models by nested quadrature.
pub fn single_observation_averaged_posterior<T: Real>(
    x: T,
    mu: T,
    spec: &IntegrationSpec<T>,
) -> CaseResult<OracleEstimate<T>> {
    let f = |v: &[T]| {
        let (a, b) = (v[0], v[1]);
        if a <= T::zero() {
            return T::zero();
        }
        let w = hyper_posterior_single(b, a, x).unwrap_or(T::zero());
        conditional_posterior(mu, x, b, a) * w
    };
    let dom = Domain::Box(vec![Interval::positive(), Interval::real_line()]);
    let hints = vec![vec![T::lit(0.1), T::one() / T::lit(3.0).sqrt(), T::one()], vec![x, mu]];
    Ok(integrate_nd_with_hints(f, &dom, &hints, spec)?)
}

pub fn stein_report(input: &SteinInput<f64>) -> CaseResult<CaseStudyReport> {
    let (m, xbar, s2, x2) = (input.m(), input.mean(), input.variance(), input.mean_square());
    let (flat_mean, flat_var) = flat_model_moments(input);
    let mut report = CaseStudyReport::new("stein");
    report.scalar("m", m as f64);
    report.scalar("xbar", xbar);
    report.scalar("s2", s2);
    report.scalar("mean_square", x2);
    report.scalar("flat_theta2_mean", flat_mean);
    report.scalar("flat_theta2_variance", flat_var);
    if m < 2 || s2 <= 0.0 {
        return Ok(report);
    }
    report.scalar("averaged_theta2", stein_averaged_theta2(x2, s2, m)?);
    let mut per = Table::new("measurands", &["i", "x", "averaged_mu", "averaged_mu2"]);
    for (i, &xi) in input.x.iter().enumerate() {
        per.push(vec![
            (i + 1) as f64,
            xi,
            stein_averaged_mu(xi, xbar, s2, m)?,
            stein_averaged_mu2(xi, xbar, s2, m)?,
        ]);
    }
    let mut sweep = Table::new("theta2_offset", &["s_x", "averaged_theta2_minus_mean_square"]);
    for k in 0..=60 {
        let s = 10f64.powf(-3.0 + k as f64 * 4.0 / 60.0);
        sweep.push(vec![s, stein_averaged_theta2(x2, s * s, m)? - x2]);
    }
    report.tables.push(per);
    report.tables.push(sweep);
    Ok(report)
}
