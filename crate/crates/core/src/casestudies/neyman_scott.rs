//! Neyman–Scott: m pairs xᵢ₁, xᵢ₂ ~ N(μᵢ, √ζ) with a common variance ζ.
//! Data models are indexed by a lower bound ζ₀ on ζ, with hyper-prior
//! 1/ζ₀. Only the pooled variance s² enters the results.

use super::{golden_max, integrate_positive_log, CaseResult, CaseStudyError, CaseStudyReport, Table};
use crate::geometry::{Bound, DataSpace, LogDensityFn, LogDensityModel, Support};
use crate::inference::{
    hyper_posterior_1d, marginal_likelihood_with_hints, Evidence, GridAxis, GriddedPosterior, Prior,
};
use crate::oracle::{IntegrationSpec, Interval, OracleEstimate};
use crate::specfun::{chi2_pdf, ln_lower_gamma_scaled, log_gamma};
use crate::Real;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct NeymanScottInput<T> {
    pub m: usize,
    pub s2: T,
    /// Pair means; carried along but unused by the closed forms.
    pub xbar: Vec<T>,
}

impl<T: Real> NeymanScottInput<T> {
    pub fn new(m: usize, s2: T) -> Self {
        Self {
            m,
            s2,
            xbar: Vec::new(),
        }
    }

    pub fn validate(&self) -> CaseResult<()> {
        if self.m == 0 {
            return Err(CaseStudyError::Domain("m must be at least 1".into()));
        }
        if !self.xbar.is_empty() && self.xbar.len() != self.m {
            return Err(CaseStudyError::Domain(format!(
                "{} pair means for m = {}",
                self.xbar.len(),
                self.m
            )));
        }
        super::need_positive("s2", self.s2)
    }
}

/// Posterior mean and variance of ζ with a flat-prior data model:
/// ms²/(m−1) and mean²/(m−2).
pub fn flat_model_moments<T: Real>(m: usize, s2: T) -> CaseResult<(T, T)> {
    super::need_min("posterior variance", "m", m, 3)?;
    super::need_positive("s2", s2)?;
    let mean = T::of(m) * s2 / T::of(m - 1);
    Ok((mean, mean * mean / T::of(m - 2)))
}

/// Sampling mean and variance of s² given ζ: ζ/2 and ζ²/m.
pub fn frequentist_moments<T: Real>(m: usize, zeta: T) -> CaseResult<(T, T)> {
    if m == 0 {
        return Err(CaseStudyError::Domain("m must be at least 1".into()));
    }
    super::need_positive("zeta", zeta)?;
    Ok((zeta * T::lit(0.5), zeta * zeta / T::of(m)))
}

/// ln Z(x̄, s² | ζ₀), the evidence of the model with ζ ≥ ζ₀.
pub fn ln_evidence<T: Real>(m: usize, s2: T, zeta0: T) -> CaseResult<T> {
    super::need_positive("s2", s2)?;
    super::need_positive("zeta0", zeta0)?;
    if m == 0 {
        return Err(CaseStudyError::Domain("m must be at least 1".into()));
    }
    let mf = T::of(m);
    let half = T::lit(0.5);
    let z = mf * s2 / zeta0;
    let ln_lower = ln_lower_gamma_scaled(mf, z)? + mf * z.ln();
    Ok(T::lit(2.0) * mf.ln() + half * mf * zeta0.ln() + ln_lower
        - T::lit(4.0).ln()
        - half * mf * mf.ln()
        - (mf + T::lit(2.0)) * half * s2.ln()
        - log_gamma(half * mf + T::one())?)
}

/// Sampling model of the pooled variance: 2ms²/ζ ~ χ²ₘ, with α = ζ and
/// data [s²]. The pair means integrate out against the flat μ prior.
pub fn pooled_variance_model<T: Real>(m: usize) -> CaseResult<LogDensityModel<T>> {
    if m == 0 {
        return Err(CaseStudyError::Domain("m must be at least 1".into()));
    }
    let dof = m as u32;
    let two_m = T::lit(2.0) * T::of(m);
    let ld: LogDensityFn<T> = Arc::new(move |x: &[T], a: &[T]| {
        let z = two_m * x[0] / a[0];
        chi2_pdf(dof, z)
            .map(|p| (two_m / a[0]).ln() + p.ln())
            .unwrap_or(T::neg_infinity())
    });
    Ok(LogDensityModel::new(
        "pooled-variance",
        1,
        ld,
        Support::new(vec![Bound::positive()]),
        DataSpace::Continuous {
            axes: vec![Interval::positive()],
            hints: None,
        },
    )?)
}

/// ln Z(ζ₀) by quadrature of the sampling model against the prior
/// (m/2)√(ζ₀ᵐ/ζ^{m+2}) on ζ ≥ ζ₀.
pub fn evidence_by_quadrature<T: Real>(
    m: usize,
    s2: T,
    zeta0: T,
    spec: &IntegrationSpec<T>,
) -> CaseResult<Evidence<T>> {
    super::need_positive("s2", s2)?;
    super::need_positive("zeta0", zeta0)?;
    let model = pooled_variance_model::<T>(m)?;
    let mf = T::of(m);
    let half = T::lit(0.5);
    let prior = Prior::proper(Arc::new(move |a: &[T]| {
        if a[0] < zeta0 {
            return T::neg_infinity();
        }
        (mf * half).ln() + half * mf * zeta0.ln() - half * (mf + T::lit(2.0)) * a[0].ln()
    }));
    let dom = [Interval::new(zeta0, T::infinity())];
    let hints = [breakpoints(s2).into_iter().filter(|&z| z > zeta0).collect::<Vec<_>>()];
    Ok(marginal_likelihood_with_hints(
        &model,
        &prior,
        &[vec![s2]],
        &dom,
        &hints,
        spec,
    )?)
}

/// Posterior density of ζ₀ under the 1/ζ₀ hyper-prior: s²Z(ζ₀)/ζ₀.
pub fn zeta0_posterior<T: Real>(m: usize, s2: T, zeta0: T) -> CaseResult<T> {
    Ok((s2.ln() + ln_evidence(m, s2, zeta0)? - zeta0.ln()).exp())
}

/// E(ζ | x, ζ₀) = ms²γ(m−1, ms²/ζ₀)/γ(m, ms²/ζ₀).
pub fn conditional_mean<T: Real>(m: usize, s2: T, zeta0: T) -> CaseResult<T> {
    super::need_min("conditional mean", "m", m, 2)?;
    super::need_positive("s2", s2)?;
    super::need_positive("zeta0", zeta0)?;
    let mf = T::of(m);
    let c = mf * s2 / zeta0;
    Ok(zeta0 * (ln_lower_gamma_scaled(mf - T::one(), c)? - ln_lower_gamma_scaled(mf, c)?).exp())
}

/// E(ζ | x) after averaging over ζ₀: 2ms²/(m−2).
pub fn averaged_mean<T: Real>(m: usize, s2: T) -> CaseResult<T> {
    super::need_min("averaged mean", "m", m, 3)?;
    super::need_positive("s2", s2)?;
    Ok(T::lit(2.0) * T::of(m) * s2 / T::of(m - 2))
}

fn breakpoints<T: Real>(s2: T) -> Vec<T> {
    [0.05, 0.3, 1.0, 2.0, 4.0, 10.0]
        .iter()
        .map(|&k| T::lit(k) * s2)
        .collect()
}

/// ∫ g(ζ₀) p(ζ₀ | x) dζ₀ over (0, ∞).
pub fn average_over_zeta0<T: Real>(
    m: usize,
    s2: T,
    g: impl Fn(T) -> T + Sync,
    spec: &IntegrationSpec<T>,
) -> CaseResult<OracleEstimate<T>> {
    zeta0_posterior(m, s2, s2)?;
    let f = |z: T| zeta0_posterior(m, s2, z).map(|p| p * g(z)).unwrap_or(T::nan());
    integrate_positive_log(f, &breakpoints(s2), spec)
}

/// The averaged mean by quadrature of E(ζ|ζ₀) against the ζ₀ posterior.
pub fn averaged_mean_by_quadrature<T: Real>(
    m: usize,
    s2: T,
    spec: &IntegrationSpec<T>,
) -> CaseResult<OracleEstimate<T>> {
    super::need_min("averaged mean", "m", m, 3)?;
    average_over_zeta0(m, s2, |z| conditional_mean(m, s2, z).unwrap_or(T::nan()), spec)
}

/// The ζ₀ posterior built by the generic 1-D hyper-posterior route.
pub fn zeta0_posterior_on_grid<T: Real>(m: usize, s2: T, axis: GridAxis<T>) -> CaseResult<GriddedPosterior<T>> {
    super::need_positive("s2", s2)?;
    let prior = Prior::improper(Arc::new(|k: &[T]| -k[0].ln()));
    let ev = |z: T| {
        ln_evidence(m, s2, z)
            .map(Evidence::absolute)
            .map_err(|e| crate::inference::InferenceError::InvalidEnsemble(e.to_string()))
    };
    Ok(hyper_posterior_1d(ev, &prior, axis)?)
}

/// Most probable ζ₀: the best node of `grid`, refined by golden section
/// between its neighbours.
pub fn zeta0_argmax<T: Real>(m: usize, s2: T, grid: &[T]) -> CaseResult<T> {
    if grid.len() < 3 {
        return Err(CaseStudyError::Domain("argmax grid needs at least 3 points".into()));
    }
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (i, &z) in grid.iter().enumerate() {
        let v = zeta0_posterior(m, s2, z)?;
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let f = |z: T| zeta0_posterior(m, s2, z).unwrap_or(T::neg_infinity());
    Ok(golden_max(f, lo, hi, T::lit(1e-10)))
}

/// A linear grid lo:hi with `count` points.
pub fn linear_grid<T: Real>(lo: T, hi: T, count: usize) -> CaseResult<Vec<T>> {
    if count < 2 || !(lo > T::zero()) || !(hi > lo) {
        return Err(CaseStudyError::Domain(format!("bad zeta0 grid {lo}:{hi}:{count}")));
    }
    let step = (hi - lo) / T::of(count - 1);
    Ok((0..count).map(|i| lo + step * T::of(i)).collect())
}

pub fn neyman_scott_report(input: &NeymanScottInput<f64>, zeta0_grid: &[f64]) -> CaseResult<CaseStudyReport> {
    input.validate()?;
    let (m, s2) = (input.m, input.s2);
    super::need_min("posterior moments", "m", m, 3)?;
    if zeta0_grid.iter().any(|&z| !(z > 0.0)) {
        return Err(CaseStudyError::Domain("zeta0 grid must be positive".into()));
    }
    let (flat_mean, flat_var) = flat_model_moments(m, s2)?;
    let (freq_mean, freq_var) = frequentist_moments(m, 2.0 * s2)?;
    let mut report = CaseStudyReport::new("neyman-scott");
    report.scalar("m", m as f64);
    report.scalar("s2", s2);
    report.scalar("flat_mean", flat_mean);
    report.scalar("flat_variance", flat_var);
    report.scalar("frequentist_s2_mean_at_2s2", freq_mean);
    report.scalar("frequentist_s2_variance_at_2s2", freq_var);
    report.scalar("averaged_mean", averaged_mean(m, s2)?);
    report.scalar(
        "averaged_mean_quadrature",
        averaged_mean_by_quadrature(m, s2, &IntegrationSpec::quadrature(1e-9))?.value,
    );
    report.scalar("zeta0_argmax", zeta0_argmax(m, s2, zeta0_grid)?);
    let mut t = Table::new("zeta0", &["zeta0", "ln_evidence", "posterior", "conditional_mean"]);
    for &z in zeta0_grid {
        t.push(vec![
            z,
            ln_evidence(m, s2, z)?,
            zeta0_posterior(m, s2, z)?,
            conditional_mean(m, s2, z)?,
        ]);
    }
    report.tables.push(t);
    Ok(report)
}
