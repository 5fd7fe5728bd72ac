//! Information geometry of parametric models: Fisher information,
//! Jeffreys density, Hellinger and Kullback–Leibler divergences, and
//! reparameterization.

use crate::linalg::Matrix;
use crate::oracle::{
    finite_diff_gradient, finite_diff_hessian, integrate_vec, mc_mean_vec, Domain, IntegrationSpec, Interval,
    OracleError, OracleRng, Scheme, StepPolicy,
};
use crate::real::Real;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;
use thiserror::Error;

pub mod models;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("degenerate metric: det = {det:e} below threshold {threshold:e}")]
    DegenerateMetric { det: f64, threshold: f64 },
    #[error("expectation over data space failed: {0}")]
    Integration(#[from] OracleError),
}

/// ln p(x | α), called as `f(x, α)`.
pub type LogDensityFn<T> = Arc<dyn Fn(&[T], &[T]) -> T + Send + Sync>;
/// Draws a data point from p(· | α).
pub type SamplerFn<T> = Arc<dyn Fn(&[T], &mut OracleRng) -> Vec<T> + Send + Sync>;
/// Per data axis, breakpoints where p(· | α) has structure.
pub type HintFn<T> = Arc<dyn Fn(&[T]) -> Vec<Vec<T>> + Send + Sync>;
pub type ConstraintFn<T> = Arc<dyn Fn(&[T]) -> bool + Send + Sync>;
pub type VecMapFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type JacobianFn<T> = Arc<dyn Fn(&[T]) -> Matrix<T> + Send + Sync>;

/// One coordinate's range, with open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound<T> {
    pub lo: T,
    pub hi: T,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl<T: Real> Bound<T> {
    pub fn open(lo: T, hi: T) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn closed(lo: T, hi: T) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn real_line() -> Self {
        Self::open(T::neg_infinity(), T::infinity())
    }

    pub fn positive() -> Self {
        Self::open(T::zero(), T::infinity())
    }

    pub fn contains(&self, x: T) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below && x.is_finite()
    }

    pub fn interval(&self) -> Interval<T> {
        Interval::new(self.lo, self.hi)
    }

    /// Interior test points used to validate maps on this range.
    fn probes(&self) -> Vec<T> {
        let l = |v: f64| T::lit(v);
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => [0.1, 0.3, 0.5, 0.7, 0.9]
                .iter()
                .map(|&f| self.lo + (self.hi - self.lo) * l(f))
                .collect(),
            (true, false) => [0.1, 0.5, 1.0, 3.0, 10.0].iter().map(|&d| self.lo + l(d)).collect(),
            (false, true) => [0.1, 0.5, 1.0, 3.0, 10.0].iter().map(|&d| self.hi - l(d)).collect(),
            (false, false) => [-3.0, -0.5, 0.0, 0.7, 3.0].iter().map(|&v| l(v)).collect(),
        }
    }
}

/// Parameter domain: a box of bounds plus an optional extra constraint.
#[derive(Clone)]
pub struct Support<T> {
    pub bounds: Vec<Bound<T>>,
    constraint: Option<ConstraintFn<T>>,
}

impl<T: Real> Support<T> {
    pub fn new(bounds: Vec<Bound<T>>) -> Self {
        Self {
            bounds,
            constraint: None,
        }
    }

    pub fn with_constraint(mut self, c: ConstraintFn<T>) -> Self {
        self.constraint = Some(c);
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, alpha: &[T]) -> bool {
        alpha.len() == self.bounds.len()
            && self.bounds.iter().zip(alpha).all(|(b, &a)| b.contains(a))
            && self.constraint.as_ref().is_none_or(|c| c(alpha))
    }

    fn probes(&self) -> Vec<Vec<T>> {
        let per: Vec<Vec<T>> = self.bounds.iter().map(|b| b.probes()).collect();
        let n = per.iter().map(|v| v.len()).max().unwrap_or(0);
        let mut out: Vec<Vec<T>> = (0..n).map(|k| per.iter().map(|v| v[k % v.len()]).collect()).collect();
        // shifted diagonal so multi-dimensional probes are not all collinear
        if per.len() > 1 {
            out.extend((0..n).map(|k| per.iter().enumerate().map(|(d, v)| v[(k + d + 1) % v.len()]).collect()));
        }
        out.retain(|p| self.contains(p));
        out
    }
}

impl<T: Real> fmt::Debug for Support<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Support")
            .field("bounds", &self.bounds)
            .field("constrained", &self.constraint.is_some())
            .finish()
    }
}

/// How expectations over the data are taken.
#[derive(Clone)]
pub enum DataSpace<T> {
    /// Data in a box, integrated by adaptive quadrature.
    Continuous {
        axes: Vec<Interval<T>>,
        hints: Option<HintFn<T>>,
    },
    /// Finitely many data values, summed exactly.
    Discrete(Vec<Vec<T>>),
    /// Monte-Carlo expectation with draws from p(· | α).
    Sampled { sampler: SamplerFn<T>, draws: usize },
}

/// A parametric sampling model p(x | α).
#[derive(Clone)]
pub struct LogDensityModel<T> {
    name: String,
    param_dim: usize,
    log_density: LogDensityFn<T>,
    support: Support<T>,
    data_space: DataSpace<T>,
}

impl<T: Real> fmt::Debug for LogDensityModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogDensityModel")
            .field("name", &self.name)
            .field("param_dim", &self.param_dim)
            .field("support", &self.support)
            .finish()
    }
}

impl<T: Real> LogDensityModel<T> {
    pub fn new(
        name: impl Into<String>,
        param_dim: usize,
        log_density: LogDensityFn<T>,
        support: Support<T>,
        data_space: DataSpace<T>,
    ) -> Result<Self, GeometryError> {
        if param_dim == 0 {
            return Err(GeometryError::InvalidModel(
                "parameter dimension must be positive".into(),
            ));
        }
        if support.dim() != param_dim {
            return Err(GeometryError::InvalidModel(format!(
                "support has {} coordinates, model has {param_dim}",
                support.dim()
            )));
        }
        if let DataSpace::Discrete(points) = &data_space {
            if points.is_empty() {
                return Err(GeometryError::InvalidModel("empty discrete data space".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            param_dim,
            log_density,
            support,
            data_space,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn support(&self) -> &Support<T> {
        &self.support
    }

    pub fn data_space(&self) -> &DataSpace<T> {
        &self.data_space
    }

    pub fn log_density(&self, x: &[T], alpha: &[T]) -> T {
        (self.log_density)(x, alpha)
    }

    /// Σ ln p(xᵢ | α) over a data set.
    pub fn log_likelihood(&self, data: &[Vec<T>], alpha: &[T]) -> T {
        data.iter().map(|x| self.log_density(x, alpha)).sum()
    }

    pub fn check_param(&self, alpha: &[T]) -> Result<(), GeometryError> {
        if alpha.len() != self.param_dim {
            return Err(GeometryError::Domain(format!(
                "parameter has {} coordinates, model {} needs {}",
                alpha.len(),
                self.name,
                self.param_dim
            )));
        }
        if !self.support.contains(alpha) {
            return Err(GeometryError::Domain(format!(
                "parameter {:?} outside the support of {}",
                alpha.iter().map(|v| v.f64()).collect::<Vec<_>>(),
                self.name
            )));
        }
        Ok(())
    }

    fn hints_at(&self, alphas: &[&[T]]) -> Vec<Vec<T>> {
        let DataSpace::Continuous { axes, hints: Some(h) } = &self.data_space else {
            return Vec::new();
        };
        let mut out: Vec<Vec<T>> = vec![Vec::new(); axes.len()];
        for a in alphas {
            for (k, v) in h(a).into_iter().enumerate().take(axes.len()) {
                out[k].extend(v);
            }
        }
        out
    }

    /// A few data points where p(x | α) is not negligible.
    fn typical_data(&self, alpha: &[T]) -> Vec<Vec<T>> {
        let pts: Vec<Vec<T>> = match &self.data_space {
            DataSpace::Discrete(points) => points.clone(),
            DataSpace::Sampled { sampler, .. } => {
                use rand::SeedableRng;
                let mut rng = OracleRng::seed_from_u64(0);
                (0..64).map(|_| sampler(alpha, &mut rng)).collect()
            }
            DataSpace::Continuous { axes, .. } => {
                let hints = self.hints_at(&[alpha]);
                let per: Vec<Vec<T>> = axes
                    .iter()
                    .enumerate()
                    .map(|(k, ax)| match hints.get(k) {
                        Some(h) if !h.is_empty() => h.clone(),
                        _ => Bound::open(ax.lo, ax.hi).probes(),
                    })
                    .collect();
                let n = per.iter().map(|v| v.len()).max().unwrap_or(0);
                (0..n).map(|k| per.iter().map(|v| v[k % v.len()]).collect()).collect()
            }
        };
        let lp: Vec<T> = pts.iter().map(|x| self.log_density(x, alpha)).collect();
        let top = lp
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(T::neg_infinity(), T::max);
        pts.into_iter()
            .zip(lp)
            .filter(|(_, l)| l.is_finite() && *l >= top - T::lit(10.0))
            .map(|(x, _)| x)
            .collect()
    }

    /// ∫ w(x) dx over the data space, where `w(x)` already contains any
    /// density factor; `draw_weight` is used instead for sampled spaces and
    /// must return the integrand divided by p(x | `sample_at`).
    fn data_expectation(
        &self,
        width: usize,
        weighted: &dyn Fn(&[T]) -> Vec<T>,
        sample_at: &[T],
        draw_weight: &(dyn Fn(&[T]) -> Vec<T> + Sync),
        hint_params: &[&[T]],
        spec: &IntegrationSpec<T>,
    ) -> Result<(Vec<T>, Vec<T>), GeometryError> {
        match &self.data_space {
            DataSpace::Continuous { axes, .. } => {
                let mut s = spec.clone();
                s.scheme = Scheme::AdaptiveQuadrature;
                let hints = self.hints_at(hint_params);
                let (v, e, _) = integrate_vec(weighted, width, &Domain::Box(axes.clone()), &hints, &s)?;
                Ok((v, e))
            }
            DataSpace::Discrete(points) => {
                let mut sum = vec![T::zero(); width];
                let mut abs = vec![T::zero(); width];
                for p in points {
                    let v = weighted(p);
                    for k in 0..width {
                        if !v[k].is_finite() {
                            return Err(OracleError::NonFinite {
                                at: p.iter().map(|x| x.f64()).collect(),
                            }
                            .into());
                        }
                        sum[k] += v[k];
                        abs[k] += v[k].abs();
                    }
                }
                let err = abs.iter().map(|&a| a * T::epsilon() * T::of(points.len())).collect();
                Ok((sum, err))
            }
            DataSpace::Sampled { sampler, draws } => {
                let alpha = sample_at.to_vec();
                let est = mc_mean_vec(|rng| draw_weight(&sampler(&alpha, rng)), width, *draws, spec.seed)?;
                Ok((
                    est.iter().map(|e| e.value).collect(),
                    est.iter().map(|e| e.error).collect(),
                ))
            }
        }
    }

    /// ∫ p(x | α) dx, which should be 1 for a valid model.
    pub fn normalization(&self, alpha: &[T], spec: &IntegrationSpec<T>) -> Result<T, GeometryError> {
        self.check_param(alpha)?;
        let w = |x: &[T]| vec![self.log_density(x, alpha).exp()];
        let one = |_: &[T]| vec![T::one()];
        Ok(self.data_expectation(1, &w, alpha, &one, &[alpha], spec)?.0[0])
    }
}

// ------------------------------------------------------------ Fisher

/// Which expectation defines the information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherForm {
    /// −E[∂ᵢ∂ⱼ ln p]
    NegativeHessian,
    /// E[∂ᵢ ln p · ∂ⱼ ln p]
    ScoreOuterProduct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix<T> {
    pub at_param: Vec<T>,
    pub matrix: Matrix<T>,
    /// Largest per-entry error estimate of the data expectation.
    pub error: T,
}

impl<T: Real> FisherMatrix<T> {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn determinant(&self) -> T {
        self.matrix.determinant()
    }

    /// Smallest eigenvalue of the symmetric matrix.
    pub fn min_eigenvalue(&self) -> T {
        self.matrix.symmetric_eigenvalues()[0]
    }

    /// Metric in new coordinates given the Jacobian ∂α/∂β: Aᵀ·J·A.
    pub fn pull_back(&self, at_param: Vec<T>, jacobian: &Matrix<T>) -> Self {
        Self {
            at_param,
            matrix: self.matrix.congruence(jacobian),
            error: self.error,
        }
    }

    /// ½ ln det J with the degenerate-metric check.
    pub fn half_log_det(&self) -> Result<T, GeometryError> {
        let p = self.dim();
        let det = self.determinant();
        let mean_diag = self.matrix.trace() / T::of(p);
        let threshold = T::lit(1e-12) * mean_diag.abs().powi(p as i32);
        if !(det > threshold) || !(mean_diag > T::zero()) {
            return Err(GeometryError::DegenerateMetric {
                det: det.f64(),
                threshold: threshold.f64(),
            });
        }
        Ok(T::lit(0.5) * det.ln())
    }
}

/// Second differences of ln p carry round-off of order ε·|ln p|/h² (about
/// 1e-8 at the default step), so the data quadrature is not asked for more.
fn fisher_spec<T: Real>(spec: &IntegrationSpec<T>) -> IntegrationSpec<T> {
    let mut s = spec.clone();
    s.rel_tol = s.rel_tol.max(T::lit(1e-7));
    s
}

/// Fisher information by the negative expected Hessian of ln p.
pub fn fisher_information<T: Real>(
    model: &LogDensityModel<T>,
    alpha: &[T],
    spec: &IntegrationSpec<T>,
) -> Result<FisherMatrix<T>, GeometryError> {
    fisher_information_with(model, alpha, spec, FisherForm::NegativeHessian, &StepPolicy::default())
}

/// Fisher information in either form with an explicit finite-difference step.
pub fn fisher_information_with<T: Real>(
    model: &LogDensityModel<T>,
    alpha: &[T],
    spec: &IntegrationSpec<T>,
    form: FisherForm,
    steps: &StepPolicy<T>,
) -> Result<FisherMatrix<T>, GeometryError> {
    model.check_param(alpha)?;
    let p = model.param_dim;
    let width = p * (p + 1) / 2;
    // per data point: the packed upper triangle of the integrand matrix
    let local = |x: &[T]| -> Result<Vec<T>, OracleError> {
        let f = |a: &[T]| model.log_density(x, a);
        let mut out = Vec::with_capacity(width);
        match form {
            FisherForm::NegativeHessian => {
                let h = finite_diff_hessian(&f, alpha, steps)?;
                for i in 0..p {
                    for j in i..p {
                        out.push(-h[(i, j)]);
                    }
                }
            }
            FisherForm::ScoreOuterProduct => {
                let g = finite_diff_gradient(&f, alpha, steps)?;
                for i in 0..p {
                    for j in i..p {
                        out.push(g[i] * g[j]);
                    }
                }
            }
        }
        Ok(out)
    };
    let failure = std::cell::RefCell::new(None);
    let weighted = |x: &[T]| -> Vec<T> {
        let pdf = model.log_density(x, alpha).exp();
        if pdf == T::zero() {
            return vec![T::zero(); width];
        }
        match local(x) {
            Ok(v) => v.into_iter().map(|m| m * pdf).collect(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                vec![T::nan(); width]
            }
        }
    };
    let unweighted = |x: &[T]| local(x).unwrap_or_else(|_| vec![T::nan(); width]);
    let mut fspec = fisher_spec(spec);
    if form == FisherForm::NegativeHessian {
        // round-off of a central second difference is about 4ε|ln p|/h²
        let scale = model
            .typical_data(alpha)
            .iter()
            .map(|x| model.log_density(x, alpha).abs())
            .fold(T::one(), |m, v| m.max(v + T::one()));
        let h = alpha.iter().map(|&a| steps.step(a)).fold(T::infinity(), T::min);
        let boost = if steps.richardson { T::lit(4.0) } else { T::one() };
        fspec.abs_tol = fspec.abs_tol.max(T::lit(4.0) * boost * T::epsilon() * scale / (h * h));
    }
    let result = model.data_expectation(width, &weighted, alpha, &unweighted, &[alpha], &fspec);
    if let Some(e) = failure.into_inner() {
        return Err(e.into());
    }
    let (vals, errs) = result?;
    let mut m = Matrix::zeros(p);
    let mut k = 0;
    for i in 0..p {
        for j in i..p {
            m[(i, j)] = vals[k];
            m[(j, i)] = vals[k];
            k += 1;
        }
    }
    let error = errs.iter().copied().fold(T::zero(), T::max);
    Ok(FisherMatrix {
        at_param: alpha.to_vec(),
        matrix: m,
        error,
    })
}

/// Unnormalized Jeffreys log density ½ ln det J(α).
pub fn jeffreys_log_density<T: Real>(
    model: &LogDensityModel<T>,
    alpha: &[T],
    spec: &IntegrationSpec<T>,
) -> Result<T, GeometryError> {
    fisher_information(model, alpha, spec)?.half_log_det()
}

// --------------------------------------------------------- divergences

/// Squared Hellinger distance ∫ (√p(x|α2) − √p(x|α1))² dx, in [0, 2].
pub fn hellinger_sq_distance<T: Real>(
    model: &LogDensityModel<T>,
    alpha1: &[T],
    alpha2: &[T],
    spec: &IntegrationSpec<T>,
) -> Result<T, GeometryError> {
    model.check_param(alpha1)?;
    model.check_param(alpha2)?;
    // symmetric in (l1, l2) operation by operation
    let term = |l1: T, l2: T| -> T {
        let (hi, lo) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
        if hi == T::neg_infinity() {
            return T::zero();
        }
        let d = (lo - hi) * T::lit(0.5);
        let em = d.exp_m1();
        (hi * T::lit(0.5)).exp().powi(2) * em * em
    };
    let weighted = |x: &[T]| vec![term(model.log_density(x, alpha1), model.log_density(x, alpha2))];
    // sampled from α1: (√(p2/p1) − 1)²
    let draw = |x: &[T]| {
        let d = (model.log_density(x, alpha2) - model.log_density(x, alpha1)) * T::lit(0.5);
        vec![d.exp_m1().powi(2)]
    };
    let (v, _) = model.data_expectation(1, &weighted, alpha1, &draw, &[alpha1, alpha2], spec)?;
    Ok(v[0].max(T::zero()).min(T::lit(2.0)))
}

/// D_KL(p(·|α2) ‖ p(·|α1)) = ∫ p2 ln(p2/p1) dx.
///
/// Evaluated as ∫ p2 (e^d − 1 − d) with d = ln p1 − ln p2, whose integrand is
/// non-negative and free of cancellation for nearby parameters.
pub fn kl_divergence<T: Real>(
    model: &LogDensityModel<T>,
    alpha2: &[T],
    alpha1: &[T],
    spec: &IntegrationSpec<T>,
) -> Result<T, GeometryError> {
    model.check_param(alpha1)?;
    model.check_param(alpha2)?;
    let kernel = |d: T| {
        if d.abs() < T::lit(1e-3) {
            // e^d − 1 − d by its series, exact to rounding for small d
            let d2 = d * d;
            d2 * (T::lit(0.5) + d * (T::one() / T::lit(6.0) + d / T::lit(24.0) + d2 / T::lit(120.0)))
        } else {
            d.exp_m1() - d
        }
    };
    let infinite = AtomicBool::new(false);
    let weighted = |x: &[T]| {
        let l2 = model.log_density(x, alpha2);
        if l2 == T::neg_infinity() {
            return vec![T::zero()];
        }
        let l1 = model.log_density(x, alpha1);
        if l1 == T::neg_infinity() {
            infinite.store(true, AtomicOrdering::Relaxed);
            return vec![T::zero()];
        }
        let d = l1 - l2;
        if d.abs() < T::one() {
            vec![l2.exp() * kernel(d)]
        } else {
            // p2·e^d = p1; avoids inf·0 where p2 underflows
            vec![l1.exp() - l2.exp() * (T::one() + d)]
        }
    };
    let draw = |x: &[T]| {
        let l2 = model.log_density(x, alpha2);
        let l1 = model.log_density(x, alpha1);
        if l1 == T::neg_infinity() {
            infinite.store(true, AtomicOrdering::Relaxed);
            return vec![T::zero()];
        }
        vec![kernel(l1 - l2)]
    };
    let (v, _) = model.data_expectation(1, &weighted, alpha2, &draw, &[alpha1, alpha2], spec)?;
    if infinite.load(AtomicOrdering::Relaxed) {
        return Ok(T::infinity());
    }
    Ok(v[0].max(T::zero()))
}

// ------------------------------------------------------ reparameterization

/// A one-to-one change of coordinates β = forward(α), α = inverse(β).
#[derive(Clone)]
pub struct Reparameterization<T> {
    forward: VecMapFn<T>,
    inverse: VecMapFn<T>,
    jacobian: Option<JacobianFn<T>>,
    target_support: Option<Support<T>>,
}

impl<T: Real> fmt::Debug for Reparameterization<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reparameterization")
            .field("analytic_jacobian", &self.jacobian.is_some())
            .field("target_support", &self.target_support)
            .finish()
    }
}

impl<T: Real> Reparameterization<T> {
    pub fn new(forward: VecMapFn<T>, inverse: VecMapFn<T>) -> Self {
        Self {
            forward,
            inverse,
            jacobian: None,
            target_support: None,
        }
    }

    /// Identity map in `p` dimensions.
    pub fn identity() -> Self {
        Self::new(Arc::new(|a: &[T]| a.to_vec()), Arc::new(|b: &[T]| b.to_vec()))
    }

    /// Scalar monotone map with analytic dα/dβ.
    pub fn monotone_1d(
        forward: impl Fn(T) -> T + Send + Sync + 'static,
        inverse: impl Fn(T) -> T + Send + Sync + 'static,
        d_inverse: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            Arc::new(move |a: &[T]| vec![forward(a[0])]),
            Arc::new(move |b: &[T]| vec![inverse(b[0])]),
        )
        .with_jacobian(Arc::new(move |b: &[T]| Matrix::diagonal(&[d_inverse(b[0])])))
    }

    /// Analytic ∂α/∂β.
    pub fn with_jacobian(mut self, jacobian: JacobianFn<T>) -> Self {
        self.jacobian = Some(jacobian);
        self
    }

    /// Support in β coordinates; required for maps of more than one coordinate.
    pub fn with_target_support(mut self, support: Support<T>) -> Self {
        self.target_support = Some(support);
        self
    }

    pub fn forward(&self, alpha: &[T]) -> Vec<T> {
        (self.forward)(alpha)
    }

    pub fn inverse(&self, beta: &[T]) -> Vec<T> {
        (self.inverse)(beta)
    }

    /// ∂α/∂β at β, analytic when supplied, otherwise central differences.
    pub fn jacobian(&self, beta: &[T]) -> Matrix<T> {
        if let Some(j) = &self.jacobian {
            return j(beta);
        }
        let p = beta.len();
        let mut m = Matrix::zeros(p);
        let policy = StepPolicy::<T> {
            rel: T::lit(1e-6),
            min: T::lit(1e-7),
            richardson: true,
        };
        let mut y = beta.to_vec();
        for j in 0..p {
            let h = policy.step(beta[j]);
            let mut col = |s: T| {
                y[j] = beta[j] + s;
                let v = self.inverse(&y);
                y[j] = beta[j];
                v
            };
            let (p1, m1, p2, m2) = (col(h), col(-h), col(h * T::lit(0.5)), col(-h * T::lit(0.5)));
            for i in 0..p {
                let coarse = (p1[i] - m1[i]) / (T::lit(2.0) * h);
                let fine = (p2[i] - m2[i]) / h;
                m[(i, j)] = (T::lit(4.0) * fine - coarse) / T::lit(3.0);
            }
        }
        m
    }

    /// Checks forward(inverse(β)) = β to `tol` (relative to max(1, |β|)).
    pub fn check_round_trip(&self, betas: &[Vec<T>], tol: T) -> Result<(), GeometryError> {
        for b in betas {
            let back = self.forward(&self.inverse(b));
            let ok = back.len() == b.len()
                && back
                    .iter()
                    .zip(b)
                    .all(|(&x, &y)| (x - y).abs() <= tol * y.abs().max(T::one()));
            if !ok {
                return Err(GeometryError::Domain(format!(
                    "forward(inverse(beta)) != beta at {:?}",
                    b.iter().map(|v| v.f64()).collect::<Vec<_>>()
                )));
            }
        }
        Ok(())
    }

    fn mapped_support(&self, original: &Support<T>) -> Result<Support<T>, GeometryError> {
        if let Some(s) = &self.target_support {
            return Ok(s.clone());
        }
        if original.dim() != 1 {
            return Err(GeometryError::Domain(
                "maps of several coordinates need an explicit target support".into(),
            ));
        }
        let b = original.bounds[0];
        let lo = self.forward(&[b.lo])[0];
        let hi = self.forward(&[b.hi])[0];
        let mapped = if lo <= hi {
            Bound {
                lo,
                hi,
                lo_closed: b.lo_closed,
                hi_closed: b.hi_closed,
            }
        } else {
            Bound {
                lo: hi,
                hi: lo,
                lo_closed: b.hi_closed,
                hi_closed: b.lo_closed,
            }
        };
        if mapped.lo.is_nan() || mapped.hi.is_nan() {
            return Err(GeometryError::Domain("map is undefined at a support endpoint".into()));
        }
        Ok(Support::new(vec![mapped]))
    }
}

/// The same family in β coordinates: ln p'(x | β) = ln p(x | α(β)).
pub fn reparameterize<T: Real>(
    model: &LogDensityModel<T>,
    map: &Reparameterization<T>,
) -> Result<LogDensityModel<T>, GeometryError> {
    let support = map.mapped_support(&model.support)?;
    let probes = support.probes();
    if probes.is_empty() {
        return Err(GeometryError::Domain("mapped support has no interior points".into()));
    }
    for beta in &probes {
        let alpha = map.inverse(beta);
        if !model.support.contains(&alpha) {
            return Err(GeometryError::Domain(format!(
                "inverse map leaves the support at beta = {:?}",
                beta.iter().map(|v| v.f64()).collect::<Vec<_>>()
            )));
        }
        let det = map.jacobian(beta).determinant();
        if !(det.abs() > T::zero()) || !det.is_finite() {
            return Err(GeometryError::Domain("singular map Jacobian".into()));
        }
    }
    map.check_round_trip(&probes, T::lit(1e-8))?;
    let inner = model.log_density.clone();
    let inv = map.inverse.clone();
    let log_density: LogDensityFn<T> = Arc::new(move |x: &[T], beta: &[T]| inner(x, &inv(beta)));
    let data_space = match &model.data_space {
        DataSpace::Continuous { axes, hints } => DataSpace::Continuous {
            axes: axes.clone(),
            hints: hints.clone().map(|h| {
                let inv = map.inverse.clone();
                Arc::new(move |beta: &[T]| h(&inv(beta))) as HintFn<T>
            }),
        },
        DataSpace::Discrete(p) => DataSpace::Discrete(p.clone()),
        DataSpace::Sampled { sampler, draws } => {
            let s = sampler.clone();
            let inv = map.inverse.clone();
            DataSpace::Sampled {
                sampler: Arc::new(move |beta: &[T], rng: &mut OracleRng| s(&inv(beta), rng)),
                draws: *draws,
            }
        }
    };
    LogDensityModel::new(
        format!("{} (reparameterized)", model.name),
        model.param_dim,
        log_density,
        support,
        data_space,
    )
}
