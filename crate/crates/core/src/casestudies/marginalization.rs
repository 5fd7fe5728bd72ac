//! The marginalization paradox on the Neyman–Scott data: the variance ζ
//! is inferred from s² alone, with the Jeffreys prior 1/ζ.

use super::neyman_scott::flat_model_moments;
use super::{integrate_positive_log, CaseResult, CaseStudyReport, Table};
use crate::oracle::{IntegrationSpec, OracleEstimate};
use crate::specfun::log_gamma;
use crate::Real;
use num_traits::Num;

/// Posterior density √((ms²)ᵐ)e^{−ms²/ζ}/(√(ζ^{m+2})Γ(m/2)).
pub fn posterior_density<T: Real>(m: usize, s2: T, zeta: T) -> CaseResult<T> {
    if m == 0 {
        return Err(super::CaseStudyError::Domain("m must be at least 1".into()));
    }
    super::need_positive("s2", s2)?;
    if !(zeta > T::zero()) {
        return Ok(T::zero());
    }
    let mf = T::of(m);
    let half = T::lit(0.5);
    let c = mf * s2;
    Ok((half * mf * c.ln() - c / zeta - half * (mf + T::lit(2.0)) * zeta.ln() - log_gamma(half * mf)?).exp())
}

/// Posterior mean 2ms²/(m−2); exact for rational `s2`.
pub fn posterior_mean<N: Num + Clone>(m: usize, s2: N) -> CaseResult<N> {
    super::need_min("posterior mean", "m", m, 3)?;
    let two = N::one() + N::one();
    Ok(two * from_usize::<N>(m) * s2 / from_usize::<N>(m - 2))
}

/// Posterior variance 2ζ̄²/(m−4); exact for rational `s2`.
pub fn posterior_variance<N: Num + Clone>(m: usize, s2: N) -> CaseResult<N> {
    super::need_min("posterior variance", "m", m, 5)?;
    let mean = posterior_mean(m, s2)?;
    let two = N::one() + N::one();
    Ok(two * mean.clone() * mean / from_usize::<N>(m - 4))
}

fn from_usize<N: Num>(k: usize) -> N {
    (0..k).fold(N::zero(), |acc, _| acc + N::one())
}

/// The first `order` raw moments of the density by quadrature, zeroth
/// included.
pub fn moments_by_quadrature<T: Real>(
    m: usize,
    s2: T,
    order: usize,
    spec: &IntegrationSpec<T>,
) -> CaseResult<Vec<OracleEstimate<T>>> {
    posterior_density(m, s2, s2)?;
    let pts: Vec<T> = [0.2, 0.5, 1.0, 2.0, 4.0, 10.0]
        .iter()
        .map(|&k| T::lit(k) * s2)
        .collect();
    (0..=order)
        .map(|k| {
            let f = |z: T| match posterior_density(m, s2, z) {
                Ok(p) if p == T::zero() => T::zero(),
                Ok(p) => p * z.powi(k as i32),
                Err(_) => T::nan(),
            };
            integrate_positive_log(f, &pts, spec)
        })
        .collect()
}

pub fn marginalization_report(m: usize, s2: f64) -> CaseResult<CaseStudyReport> {
    let mean = posterior_mean(m, s2)?;
    let mut report = CaseStudyReport::new("marginalization");
    report.scalar("m", m as f64);
    report.scalar("s2", s2);
    report.scalar("mean", mean);
    if m >= 5 {
        report.scalar("variance", posterior_variance(m, s2)?);
        let (flat_mean, flat_var) = flat_model_moments(m, s2)?;
        report.scalar("flat_mean", flat_mean);
        report.scalar("flat_variance", flat_var);
    }
    let mut t = Table::new("posterior", &["zeta", "density"]);
    for k in 1..=200 {
        let z = mean * 4.0 * k as f64 / 200.0;
        t.push(vec![z, posterior_density(m, s2, z)?]);
    }
    report.tables.push(t);
    Ok(report)
}
