//! Cell probabilities of a multinomial when the number of cells m is itself
//! uncertain. Each m carries the Jeffreys prior Dirichlet(½, …, ½); models
//! m₁..=m₂ are equiprobable a priori.

use super::{CaseResult, CaseStudyError, CaseStudyReport, Table};
use crate::inference::{model_posterior, Evidence, EvidenceFn, ModelEnsemble, ModelPosterior};
use crate::oracle::{mc_expectation, OracleEstimate, OracleRng};
use crate::specfun::ln_gamma_unchecked;
use crate::Real;
use num_rational::Ratio;
use rand_distr::{Distribution, Gamma};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultinomialInput {
    pub counts: Vec<u64>,
    /// Largest number of cells considered, m₂.
    pub m_max: usize,
}

impl MultinomialInput {
    pub fn trials(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Number of non-empty cells, m₁.
    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Smallest admissible model: m₁, and never fewer than two cells.
    pub fn m_min(&self) -> usize {
        self.occupied().max(2)
    }

    pub fn validate(&self) -> CaseResult<()> {
        if self.trials() == 0 {
            return Err(CaseStudyError::Domain("counts must sum to at least 1".into()));
        }
        if self.m_max < self.m_min() {
            return Err(CaseStudyError::Infeasible(format!(
                "m_max = {} is below the {} occupied cells",
                self.m_max,
                self.m_min()
            )));
        }
        Ok(())
    }
}

fn ln_factorial<T: Real>(k: u64) -> T {
    ln_gamma_unchecked(T::lit(k as f64 + 1.0))
}

/// ln Z(x | m) with Dirichlet(½) on the m-simplex; empty cells beyond the
/// listed counts are implicit.
pub fn ln_evidence<T: Real>(counts: &[u64], m: usize) -> CaseResult<T> {
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    if m < occupied.max(2) {
        return Err(CaseStudyError::Infeasible(format!(
            "m = {m} cells cannot hold {occupied} occupied cells"
        )));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(CaseStudyError::Domain("counts must sum to at least 1".into()));
    }
    let half = T::lit(0.5);
    let mf = T::of(m);
    let mut acc = ln_factorial::<T>(n) + ln_gamma_unchecked(mf * half)
        - ln_gamma_unchecked(T::lit(n as f64) + mf * half)
        - mf * half * T::PI().ln();
    for &x in counts.iter().filter(|&&c| c > 0) {
        acc += ln_gamma_unchecked(T::lit(x as f64) + half) - ln_factorial::<T>(x);
    }
    // Each empty cell contributes Γ(½)/0! = √π.
    acc += T::of(m - occupied) * half * T::PI().ln();
    Ok(acc)
}

/// Posterior mean of a cell holding `count` of `trials` under m cells:
/// (x + ½)/(n + m/2), exactly.
pub fn posterior_mean(count: u64, trials: u64, m: usize) -> Ratio<i64> {
    Ratio::new(2 * count as i64 + 1, 2 * trials as i64 + m as i64)
}

/// Posterior model probabilities over m = m_min..=m_max.
pub fn model_weights<T: Real>(input: &MultinomialInput) -> CaseResult<ModelPosterior<T>> {
    input.validate()?;
    let members: Vec<(String, EvidenceFn<T, [u64]>)> = (input.m_min()..=input.m_max)
        .map(|m| {
            let f: EvidenceFn<T, [u64]> = Box::new(move |counts: &[u64]| {
                ln_evidence::<T>(counts, m)
                    .map(Evidence::absolute)
                    .map_err(|e| crate::inference::InferenceError::InvalidEnsemble(e.to_string()))
            });
            (format!("m={m}"), f)
        })
        .collect();
    let ensemble = ModelEnsemble::uniform(members)?;
    Ok(model_posterior(&ensemble, input.counts.as_slice())?)
}

/// Least-squares slope of ln Prob(m|x) against ln m over the last decade
/// of m, [m_max/10, m_max].
pub fn tail_slope<T: Real>(ms: &[usize], weights: &[T]) -> CaseResult<T> {
    let m_max = ms.iter().copied().max().unwrap_or(0);
    let pts: Vec<(T, T)> = ms
        .iter()
        .zip(weights)
        .filter(|(&m, &w)| 10 * m >= m_max && w > T::zero())
        .map(|(&m, &w)| (T::of(m).ln(), w.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(CaseStudyError::Domain(
            "need at least two models in the last decade".into(),
        ));
    }
    let k = T::of(pts.len());
    let (sx, sy) = pts
        .iter()
        .fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for &(x, y) in &pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

/// Exact d ln Prob(m|x)/d ln m treating m as continuous:
/// −n + Σ_{k<n} 2k/(m+2k). Tends to −n as m grows.
pub fn local_tail_slope<T: Real>(trials: u64, m: T) -> T {
    let mut s = -T::lit(trials as f64);
    for k in 0..trials {
        let two_k = T::lit(2.0 * k as f64);
        s += two_k / (m + two_k);
    }
    s
}

/// Evidence for m cells by Monte Carlo: the multinomial likelihood averaged
/// over Dirichlet(½) draws.
pub fn evidence_by_monte_carlo(counts: &[u64], m: usize, draws: usize, seed: u64) -> CaseResult<OracleEstimate<f64>> {
    let occupied = counts.iter().filter(|&&c| c > 0).count();
    if m < occupied.max(2) {
        return Err(CaseStudyError::Infeasible(format!("m = {m} too small for the counts")));
    }
    // Cells are exchangeable, so the occupied ones come first.
    let counts: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    let n: u64 = counts.iter().sum();
    let gamma = Gamma::new(0.5, 1.0).map_err(|e| CaseStudyError::Domain(e.to_string()))?;
    let ln_coef = ln_factorial::<f64>(n) - counts.iter().map(|&x| ln_factorial::<f64>(x)).sum::<f64>();
    let sampler = |rng: &mut OracleRng| -> Vec<f64> {
        let g: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
        let s: f64 = g.iter().sum();
        g.into_iter().map(|v| v / s).collect()
    };
    let like = |theta: &Vec<f64>| {
        let ln: f64 = counts
            .iter()
            .zip(theta)
            .filter(|(&x, _)| x > 0)
            .map(|(&x, &t)| x as f64 * t.ln())
            .sum();
        (ln_coef + ln).exp()
    };
    Ok(mc_expectation(sampler, like, draws, seed)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialAnalysis<T> {
    pub models: Vec<usize>,
    pub ln_evidence: Vec<T>,
    pub weights: Vec<T>,
    /// Model-averaged posterior mean of each listed cell.
    pub averaged_means: Vec<T>,
    pub tail_slope: T,
}

pub fn analyze<T: Real>(input: &MultinomialInput) -> CaseResult<MultinomialAnalysis<T>> {
    let post = model_weights::<T>(input)?;
    let models: Vec<usize> = (input.m_min()..=input.m_max).collect();
    let n = input.trials();
    let averaged_means = input
        .counts
        .iter()
        .map(|&x| {
            models
                .iter()
                .zip(&post.weights)
                .map(|(&m, &w)| w * ratio_to::<T>(posterior_mean(x, n, m)))
                .sum()
        })
        .collect();
    let tail_slope = if models.len() >= 2 {
        tail_slope(&models, &post.weights)?
    } else {
        T::nan()
    };
    Ok(MultinomialAnalysis {
        models,
        ln_evidence: post.ln_evidence,
        weights: post.weights,
        averaged_means,
        tail_slope,
    })
}

fn ratio_to<T: Real>(r: Ratio<i64>) -> T {
    T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64)
}

pub fn multinomial_report(input: &MultinomialInput) -> CaseResult<CaseStudyReport> {
    let a = analyze::<f64>(input)?;
    let n = input.trials();
    let mut report = CaseStudyReport::new("multinomial");
    report.scalar("trials", n as f64);
    report.scalar("occupied_cells", input.occupied() as f64);
    report.scalar("m_min", input.m_min() as f64);
    report.scalar("m_max", input.m_max as f64);
    report.scalar("tail_slope", a.tail_slope);
    let mut models = Table::new("models", &["m", "ln_evidence", "probability"]);
    for ((&m, &z), &w) in a.models.iter().zip(&a.ln_evidence).zip(&a.weights) {
        models.push(vec![m as f64, z, w]);
    }
    let mut means = Table::new("means", &["cell", "count", "mean_at_m_min", "averaged_mean"]);
    for (i, (&x, &avg)) in input.counts.iter().zip(&a.averaged_means).enumerate() {
        means.push(vec![
            (i + 1) as f64,
            x as f64,
            ratio_to::<f64>(posterior_mean(x, n, input.m_min())),
            avg,
        ]);
    }
    report.tables.push(models);
    report.tables.push(means);
    Ok(report)
}
