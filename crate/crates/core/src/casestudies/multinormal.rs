//! Means of m Gaussian measurands sharing one unknown variance, each
//! measured n times, under the Jeffreys prior on (μ₁..μ_m, σ).

use super::{CaseResult, CaseStudyError, CaseStudyReport, Table};
use crate::oracle::{integrate_1d, IntegrationSpec, OracleEstimate};
use crate::specfun::{hyp2f1, log_gamma};
use crate::{Matrix, Real};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};

/// The factor m·σ₀ᵐ/V_μ from normalizing the prior on σ ≥ σ₀ and on a
/// μ-region of volume V_μ, kept as an exact ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriorVolumeFactor {
    pub m: u32,
    pub sigma0: Ratio<i64>,
    pub v_mu: Ratio<i64>,
}

impl PriorVolumeFactor {
    pub fn new(m: u32, sigma0: Ratio<i64>, v_mu: Ratio<i64>) -> CaseResult<Self> {
        if m == 0 || sigma0 <= Ratio::zero() || v_mu <= Ratio::zero() {
            return Err(CaseStudyError::Domain(format!(
                "need m >= 1, sigma0 > 0, V_mu > 0 (got {m}, {sigma0}, {v_mu})"
            )));
        }
        Ok(Self { m, sigma0, v_mu })
    }

    /// m·σ₀ᵐ/V_μ exactly, or `None` on i64 overflow.
    pub fn exact(&self) -> Option<Ratio<i64>> {
        let mut p = Ratio::<i64>::one();
        for _ in 0..self.m {
            let numer = p.numer().checked_mul(*self.sigma0.numer())?;
            let denom = p.denom().checked_mul(*self.sigma0.denom())?;
            p = Ratio::new(numer, denom);
        }
        let numer = p.numer().checked_mul(self.m as i64)?.checked_mul(*self.v_mu.denom())?;
        let denom = p.denom().checked_mul(*self.v_mu.numer())?;
        Some(Ratio::new(numer, denom))
    }

    pub fn ln_value<T: Real>(&self) -> T {
        let r = |x: Ratio<i64>| T::lit(x.to_f64().unwrap_or(f64::NAN));
        T::of(self.m as usize).ln() + T::of(self.m as usize) * r(self.sigma0).ln() - r(self.v_mu).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultinormalInput<T> {
    pub m: usize,
    pub n: usize,
    /// Pooled biased variance s̄².
    pub pooled_s2: T,
    /// Per-measurand sample means.
    pub xbar: Vec<T>,
    /// Size of the subset of means of interest (the first q).
    pub q: usize,
    pub sigma0: Ratio<i64>,
    pub v_mu: Ratio<i64>,
}

impl<T: Real> MultinormalInput<T> {
    pub fn validate(&self) -> CaseResult<()> {
        if self.m == 0 || self.n == 0 {
            return Err(CaseStudyError::Domain(format!(
                "need m, n >= 1 (got {}, {})",
                self.m, self.n
            )));
        }
        if self.xbar.len() != self.m {
            return Err(CaseStudyError::Domain(format!(
                "{} sample means for m = {}",
                self.xbar.len(),
                self.m
            )));
        }
        if self.q == 0 || self.q > self.m {
            return Err(CaseStudyError::Domain(format!(
                "subset size q = {} outside 1..={}",
                self.q, self.m
            )));
        }
        super::need_positive("pooled_s2", self.pooled_s2)?;
        PriorVolumeFactor::new(self.m as u32, self.sigma0, self.v_mu)?;
        Ok(())
    }

    fn mn(&self) -> usize {
        self.m * self.n
    }
}

/// ln Z with the integration domain extended to ℝᵐ × ℝ⁺ (an approximation
/// that is accurate when σ₀ and V_μ are far from the data).
pub fn ln_evidence<T: Real>(input: &MultinormalInput<T>) -> CaseResult<T> {
    input.validate()?;
    let (m, mn) = (T::of(input.m), T::of(input.mn()));
    let n = T::of(input.n);
    let half = T::lit(0.5);
    let factor = PriorVolumeFactor::new(input.m as u32, input.sigma0, input.v_mu)?;
    Ok(half * m * (T::lit(2.0) * m).ln() + log_gamma(mn * half)?
        - T::LN_2()
        - half * (m * (n + T::one()) * mn.ln() + m * (n - T::one()) * T::PI().ln())
        - half * mn * input.pooled_s2.ln()
        + factor.ln_value::<T>())
}

/// Posterior variance of each mean, m·s̄²/(mn−2); the same for any subset.
pub fn coordinate_variance<T: Real>(m: usize, n: usize, pooled_s2: T) -> CaseResult<T> {
    if m * n <= 2 {
        return Err(CaseStudyError::MomentUndefined {
            what: "posterior variance",
            param: "mn",
            got: (m * n) as f64,
            need: 3.0,
        });
    }
    super::need_positive("pooled_s2", pooled_s2)?;
    Ok(T::of(m) * pooled_s2 / T::of(m * n - 2))
}

/// Joint posterior density of the first q means: a q-variate Student
/// distribution with mn degrees of freedom centred on x̄′.
pub fn subset_density<T: Real>(input: &MultinormalInput<T>, mu: &[T]) -> CaseResult<T> {
    input.validate()?;
    let q = input.q;
    if mu.len() != q {
        return Err(CaseStudyError::Domain(format!(
            "{}-vector for a subset of size {q}",
            mu.len()
        )));
    }
    let (m, mn, qf) = (T::of(input.m), T::of(input.mn()), T::of(q));
    let half = T::lit(0.5);
    let t2 = mu.iter().zip(&input.xbar).map(|(&u, &x)| (x - u) * (x - u)).sum::<T>() / (m * input.pooled_s2);
    let ln = log_gamma((mn + qf) * half)?
        - (mn + qf) * half * t2.ln_1p()
        - half * qf * (m * T::PI()).ln()
        - log_gamma(mn * half)?
        - half * qf * input.pooled_s2.ln();
    Ok(ln.exp())
}

/// Student-t density with `dof` degrees of freedom.
pub fn student_t_density<T: Real>(dof: T, u: T) -> CaseResult<T> {
    super::need_positive("dof", dof)?;
    let half = T::lit(0.5);
    let ln = log_gamma((dof + T::one()) * half)?
        - log_gamma(dof * half)?
        - half * (dof * T::PI()).ln()
        - (dof + T::one()) * half * (u * u / dof).ln_1p();
    Ok(ln.exp())
}

fn check_ball(q: usize, mn: usize) -> CaseResult<()> {
    if q == 0 {
        return Err(CaseStudyError::Domain("ball dimension q must be at least 1".into()));
    }
    if mn < 3 {
        return Err(CaseStudyError::Domain(format!("mn = {mn} must be at least 3")));
    }
    Ok(())
}

/// Posterior probability that the first q means lie within a ball of radius
/// σ_μ = √(m·s̄²/(mn−2)) around x̄′. Depends only on q and mn.
pub fn credible_ball_probability<T: Real>(q: usize, mn: usize) -> CaseResult<T> {
    check_ball(q, mn)?;
    let (qf, mnf) = (T::of(q), T::of(mn));
    let half = T::lit(0.5);
    let f = hyp2f1(
        qf * half,
        (mnf + qf) * half,
        (qf + T::lit(2.0)) * half,
        T::one() / (T::lit(2.0) - mnf),
    )?;
    let ln = log_gamma((mnf + qf) * half)?
        - log_gamma(mnf * half)?
        - log_gamma(qf * half + T::one())?
        - half * qf * (mnf - T::lit(2.0)).ln();
    Ok(ln.exp() * f.value)
}

/// The q = 1 ball probability by direct quadrature of the Student density
/// over [−σ_μ, σ_μ].
pub fn credible_interval_by_quadrature<T: Real>(mn: usize, spec: &IntegrationSpec<T>) -> CaseResult<OracleEstimate<T>> {
    check_ball(1, mn)?;
    let input = MultinormalInput {
        m: 1,
        n: mn,
        pooled_s2: T::one(),
        xbar: vec![T::zero()],
        q: 1,
        sigma0: Ratio::one(),
        v_mu: Ratio::one(),
    };
    let r = coordinate_variance(1, mn, T::one())?.sqrt();
    let f = |u: T| subset_density(&input, &[u]).unwrap_or(T::nan());
    Ok(integrate_1d(f, -r, r, spec)?)
}

/// The ball probability for any q by quadrature of the Beta(q/2, mn/2)
/// density of |t|²/(1+|t|²) up to 1/(mn−1).
pub fn credible_ball_by_quadrature<T: Real>(
    q: usize,
    mn: usize,
    spec: &IntegrationSpec<T>,
) -> CaseResult<OracleEstimate<T>> {
    check_ball(q, mn)?;
    let (a, b) = (T::of(q) * T::lit(0.5), T::of(mn) * T::lit(0.5));
    let ln_beta = log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?;
    // u = v² removes the u^(a−1) endpoint singularity for odd q.
    let f = |v: T| {
        let u = v * v;
        T::lit(2.0) * ((T::lit(2.0) * a - T::one()) * v.ln() + (b - T::one()) * (-u).ln_1p() - ln_beta).exp()
    };
    let hi = (T::one() / T::of(mn - 1)).sqrt();
    Ok(integrate_1d(f, T::zero(), hi, spec)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultinormalPosterior<T> {
    pub ln_evidence: T,
    /// Posterior location of the subset, x̄′.
    pub location: Vec<T>,
    /// Posterior covariance of the subset, m·s̄²𝕀_q/(mn−2).
    pub covariance: Matrix<T>,
    pub coordinate_variance: T,
}

pub fn multinormal_posterior<T: Real>(input: &MultinormalInput<T>) -> CaseResult<MultinormalPosterior<T>> {
    input.validate()?;
    let var = coordinate_variance(input.m, input.n, input.pooled_s2)?;
    Ok(MultinormalPosterior {
        ln_evidence: ln_evidence(input)?,
        location: input.xbar[..input.q].to_vec(),
        covariance: Matrix::diagonal(&vec![var; input.q]),
        coordinate_variance: var,
    })
}

pub fn multinormal_summary(input: &MultinormalInput<f64>) -> CaseResult<CaseStudyReport> {
    let post = multinormal_posterior(input)?;
    let factor = PriorVolumeFactor::new(input.m as u32, input.sigma0, input.v_mu)?;
    let mut report = CaseStudyReport::new("multinormal");
    report.scalar("m", input.m as f64);
    report.scalar("n", input.n as f64);
    report.scalar("q", input.q as f64);
    report.scalar("pooled_s2", input.pooled_s2);
    report.scalar("prior_volume_factor", factor.ln_value::<f64>().exp());
    report.scalar("ln_evidence", post.ln_evidence);
    report.scalar("evidence", post.ln_evidence.exp());
    report.scalar("coordinate_variance", post.coordinate_variance);
    report.scalar(
        "ball_probability",
        credible_ball_probability::<f64>(input.q, input.m * input.n)?,
    );
    let mut loc = Table::new("subset", &["index", "location", "variance"]);
    for (i, &x) in post.location.iter().enumerate() {
        loc.push(vec![(i + 1) as f64, x, post.coordinate_variance]);
    }
    let mut ball = Table::new("credible_ball", &["q", "probability"]);
    for q in 1..=input.m.max(12) {
        ball.push(vec![q as f64, credible_ball_probability::<f64>(q, input.m * input.n)?]);
    }
    report.tables.push(loc);
    report.tables.push(ball);
    Ok(report)
}
