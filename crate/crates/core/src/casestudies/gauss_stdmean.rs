//! Mean and standard deviation of a Gaussian when the measurand is the
//! standardized mean λ = μ/σ.
//!
//! The data are standardized (sample mean 0, biased sd 1), so only `n`
//! enters. Two improper priors are compared: 1/σ on (μ, σ) and
//! 1/(√(2+λ²)σ) on (λ, σ). Their evidences and posteriors disagree, and the
//! pushed-forward posterior of the first is not the second.

use super::{CaseResult, CaseStudyError, CaseStudyReport, Table};
use crate::geometry::models::gaussian;
use crate::geometry::{reparameterize, Bound, Reparameterization, Support};
use crate::inference::{marginal_likelihood_with_hints, Evidence, Prior};
use crate::oracle::{integrate_nd_with_hints, Domain, IntegrationSpec, Interval, OracleEstimate};
use crate::specfun::{ln_bessel_k0, log_gamma};
use crate::{Matrix, Real};
use std::sync::Arc;

fn check_n(n: usize) -> CaseResult<()> {
    if n < 2 {
        return Err(CaseStudyError::Domain(format!(
            "sample size n = {n} must be at least 2"
        )));
    }
    Ok(())
}

fn check_sigma<T: Real>(sigma: T) -> CaseResult<()> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(CaseStudyError::Domain(format!("sigma = {sigma} must be positive")));
    }
    Ok(())
}

/// ln of the evidence under the 1/σ prior on (μ, σ).
pub fn ln_evidence_mu<T: Real>(n: usize) -> CaseResult<T> {
    check_n(n)?;
    let nf = T::of(n);
    let half = T::lit(0.5);
    Ok(log_gamma((nf - T::one()) * half)? - T::LN_2() - half * (nf * nf.ln() + (nf - T::one()) * T::PI().ln()))
}

/// Evidence under the 1/σ prior; flagged up-to-constant.
pub fn gauss_std_evidence_mu<T: Real>(n: usize) -> CaseResult<Evidence<T>> {
    Ok(Evidence::up_to_constant(ln_evidence_mu(n)?))
}

/// ln of the evidence under the 1/(√(2+λ²)σ) prior on (λ, σ).
pub fn ln_evidence_lambda<T: Real>(n: usize) -> CaseResult<T> {
    check_n(n)?;
    let nf = T::of(n);
    let half_n = nf * T::lit(0.5);
    Ok(ln_bessel_k0(half_n)? + log_gamma(half_n + T::one())? + half_n - nf.ln() - half_n * (nf * T::PI()).ln())
}

/// Evidence under the 1/(√(2+λ²)σ) prior; flagged up-to-constant.
pub fn gauss_std_evidence_lambda<T: Real>(n: usize) -> CaseResult<Evidence<T>> {
    Ok(Evidence::up_to_constant(ln_evidence_lambda(n)?))
}

/// ln p(x | μ, σ) for standardized data: Σ(xᵢ−μ)² = n(1+μ²).
pub fn ln_likelihood<T: Real>(n: usize, mu: T, sigma: T) -> T {
    let nf = T::of(n);
    let half = T::lit(0.5);
    -half * nf * (T::TAU() * sigma * sigma).ln() - nf * (T::one() + mu * mu) / (T::lit(2.0) * sigma * sigma)
}

/// Joint posterior of (μ, σ) under the 1/σ prior.
pub fn gauss_std_posterior_mu<T: Real>(n: usize, mu: T, sigma: T) -> CaseResult<T> {
    check_n(n)?;
    check_sigma(sigma)?;
    let nf = T::of(n);
    let half = T::lit(0.5);
    let ln = half * nf * nf.ln()
        - (nf - T::lit(2.0)) * half * T::LN_2()
        - half * T::PI().ln()
        - (nf + T::one()) * sigma.ln()
        - log_gamma((nf - T::one()) * half)?
        - nf * (T::one() + mu * mu) / (T::lit(2.0) * sigma * sigma);
    Ok(ln.exp())
}

/// Joint posterior of (λ, σ) under the 1/(√(2+λ²)σ) prior, computed as
/// likelihood × prior / evidence.
pub fn gauss_std_posterior_lambda<T: Real>(n: usize, lambda: T, sigma: T) -> CaseResult<T> {
    check_n(n)?;
    check_sigma(sigma)?;
    let ln_prior = -T::lit(0.5) * (T::lit(2.0) + lambda * lambda).ln() - sigma.ln();
    Ok((ln_likelihood(n, lambda * sigma, sigma) + ln_prior - ln_evidence_lambda::<T>(n)?).exp())
}

/// The (μ, σ) posterior carried to (λ, σ) by the change of variables μ = λσ.
pub fn gauss_std_posterior_mu_as_lambda<T: Real>(n: usize, lambda: T, sigma: T) -> CaseResult<T> {
    Ok(gauss_std_posterior_mu(n, lambda * sigma, sigma)? * sigma)
}

/// n points with sample mean 0 and biased standard deviation 1.
pub fn standardized_data<T: Real>(n: usize) -> Vec<Vec<T>> {
    let nf = T::of(n);
    let raw: Vec<T> = (0..n).map(|i| T::of(i) - (nf - T::one()) * T::lit(0.5)).collect();
    let var = raw.iter().map(|&x| x * x).sum::<T>() / nf;
    let sd = var.sqrt();
    raw.into_iter().map(|x| vec![x / sd]).collect()
}

fn hints<T: Real>() -> [Vec<T>; 2] {
    [
        [-1.0, -0.3, 0.0, 0.3, 1.0].map(T::lit).to_vec(),
        [0.3, 0.6, 1.0, 1.5, 3.0].map(T::lit).to_vec(),
    ]
}

/// (μ, σ) → (λ, σ) with λ = μ/σ.
pub fn standardized_mean_map<T: Real>() -> Reparameterization<T> {
    Reparameterization::new(
        Arc::new(|a: &[T]| vec![a[0] / a[1], a[1]]),
        Arc::new(|b: &[T]| vec![b[0] * b[1], b[1]]),
    )
    .with_jacobian(Arc::new(|b: &[T]| {
        let mut j = Matrix::zeros(2);
        j[(0, 0)] = b[1];
        j[(0, 1)] = b[0];
        j[(1, 1)] = T::one();
        j
    }))
    .with_target_support(Support::new(vec![Bound::real_line(), Bound::positive()]))
}

/// Evidence under the 1/σ prior by 2-D quadrature of the Gaussian model
/// over ℝ × ℝ⁺.
pub fn evidence_mu_by_quadrature<T: Real>(n: usize, spec: &IntegrationSpec<T>) -> CaseResult<Evidence<T>> {
    check_n(n)?;
    let model = gaussian::<T>()?;
    let prior = Prior::improper(Arc::new(|a: &[T]| -a[1].ln()));
    let dom = [Interval::real_line(), Interval::positive()];
    Ok(marginal_likelihood_with_hints(
        &model,
        &prior,
        &standardized_data(n),
        &dom,
        &hints(),
        spec,
    )?)
}

/// Evidence under the (λ, σ) prior by 2-D quadrature of the reparameterized
/// Gaussian model.
pub fn evidence_lambda_by_quadrature<T: Real>(n: usize, spec: &IntegrationSpec<T>) -> CaseResult<Evidence<T>> {
    check_n(n)?;
    let model = reparameterize(&gaussian::<T>()?, &standardized_mean_map())?;
    let prior = Prior::improper(Arc::new(|b: &[T]| {
        -T::lit(0.5) * (T::lit(2.0) + b[0] * b[0]).ln() - b[1].ln()
    }));
    let dom = [Interval::real_line(), Interval::positive()];
    Ok(marginal_likelihood_with_hints(
        &model,
        &prior,
        &standardized_data(n),
        &dom,
        &hints(),
        spec,
    )?)
}

/// ∫∫ density(u, σ) du dσ over ℝ × ℝ⁺.
pub fn integrate_posterior<T: Real>(
    density: impl Fn(T, T) -> CaseResult<T> + Sync,
    spec: &IntegrationSpec<T>,
) -> CaseResult<OracleEstimate<T>> {
    let dom = Domain::Box(vec![Interval::real_line(), Interval::positive()]);
    let f = |x: &[T]| density(x[0], x[1]).unwrap_or(T::nan());
    Ok(integrate_nd_with_hints(f, &dom, &hints(), spec)?)
}

/// Largest |p₁(λσ, σ)σ − p₂(λ, σ)| over a (λ, σ) grid.
pub fn max_posterior_discrepancy<T: Real>(n: usize, lambdas: &[T], sigmas: &[T]) -> CaseResult<T> {
    let mut worst = T::zero();
    for &l in lambdas {
        for &s in sigmas {
            let d = (gauss_std_posterior_mu_as_lambda(n, l, s)? - gauss_std_posterior_lambda(n, l, s)?).abs();
            worst = worst.max(d);
        }
    }
    Ok(worst)
}

/// Evidences under both priors for n in `n_min..=n_max`.
pub fn gauss_stdmean_report(n_min: usize, n_max: usize) -> CaseResult<CaseStudyReport> {
    check_n(n_min)?;
    if n_max < n_min {
        return Err(CaseStudyError::Domain(format!(
            "n_max = {n_max} is below n_min = {n_min}"
        )));
    }
    let mut table = Table::new("evidence", &["n", "z_mu", "z_lambda", "ratio"]);
    for n in n_min..=n_max {
        let z1 = ln_evidence_mu::<f64>(n)?;
        let z2 = ln_evidence_lambda::<f64>(n)?;
        table.push(vec![n as f64, z1.exp(), z2.exp(), (z2 - z1).exp()]);
    }
    let mut report = CaseStudyReport::new("gauss-stdmean");
    report.scalar("n_min", n_min as f64);
    report.scalar("n_max", n_max as f64);
    report.tables.push(table);
    Ok(report)
}
