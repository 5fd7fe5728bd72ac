//! Bayesian machinery on top of the geometry engine: gridded posteriors,
//! marginal likelihoods, posterior model probabilities and model averaging.

use crate::geometry::{jeffreys_log_density, GeometryError, LogDensityModel};
use crate::linalg::Matrix;
use crate::oracle::{integrate_nd_with_hints, Domain, IntegrationSpec, Interval, OracleError};
use crate::real::{log_sum_exp, Real};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_GRID_POINTS: usize = 257;

/// Boundary cells holding more than this share of the mass trigger a warning.
pub const MASS_LEAK_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("empty support: {0}")]
    EmptySupport(String),
    #[error("evidence integral diverges: {0}")]
    Divergent(String),
    #[error("model {label} has an evidence defined only up to a constant and cannot be compared")]
    IncomparableEvidence { label: String },
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("summary shapes differ: {0}")]
    Shape(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Integration(#[from] OracleError),
}

pub type LogPriorFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

// ------------------------------------------------------------------ priors

/// Whether a prior (and anything computed from it) is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvidenceScale {
    Absolute,
    UpToConstant,
}

/// A log prior density over parameters, tagged proper or improper.
#[derive(Clone)]
pub struct Prior<T> {
    log_density: LogPriorFn<T>,
    scale: EvidenceScale,
}

impl<T: Real> Prior<T> {
    /// A prior the caller asserts is normalized.
    pub fn proper(log_density: LogPriorFn<T>) -> Self {
        Self {
            log_density,
            scale: EvidenceScale::Absolute,
        }
    }

    /// A prior known only up to a factor, e.g. 1/σ on (0, ∞).
    pub fn improper(log_density: LogPriorFn<T>) -> Self {
        Self {
            log_density,
            scale: EvidenceScale::UpToConstant,
        }
    }

    pub fn flat() -> Self {
        Self::improper(Arc::new(|_: &[T]| T::zero()))
    }

    /// Unnormalized Jeffreys prior ½ ln det J(α) of `model`. Points where the
    /// metric cannot be formed get −∞.
    pub fn jeffreys(model: &LogDensityModel<T>, spec: &IntegrationSpec<T>) -> Self
    where
        T: 'static,
    {
        let model = model.clone();
        let spec = spec.clone();
        Self::improper(Arc::new(move |a: &[T]| {
            jeffreys_log_density(&model, a, &spec).unwrap_or(T::neg_infinity())
        }))
    }

    /// Normalizes over a box; the result is proper.
    pub fn normalized_on(&self, domain: &[Interval<T>], spec: &IntegrationSpec<T>) -> Result<Self, InferenceError> {
        let ln_norm = ln_integral(&*self.log_density, domain, &[], spec)?.0;
        if !ln_norm.is_finite() {
            return Err(InferenceError::Divergent("prior normalization is not finite".into()));
        }
        let f = self.log_density.clone();
        Ok(Self::proper(Arc::new(move |a: &[T]| f(a) - ln_norm)))
    }

    pub fn log_density(&self, alpha: &[T]) -> T {
        (self.log_density)(alpha)
    }

    pub fn scale(&self) -> EvidenceScale {
        self.scale
    }
}

impl<T> fmt::Debug for Prior<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Prior").field("scale", &self.scale).finish()
    }
}

// -------------------------------------------------------------------- grids

/// One grid axis: `points` nodes from `lo` to `hi`, uniformly spaced either in
/// the value or in its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis<T> {
    pub lo: T,
    pub hi: T,
    pub points: usize,
    pub log_spaced: bool,
}

impl<T: Real> GridAxis<T> {
    pub fn linear(lo: T, hi: T, points: usize) -> Self {
        Self {
            lo,
            hi,
            points,
            log_spaced: false,
        }
    }

    pub fn log(lo: T, hi: T, points: usize) -> Self {
        Self {
            lo,
            hi,
            points,
            log_spaced: true,
        }
    }

    fn validate(&self) -> Result<(), InferenceError> {
        if !(self.lo.is_finite() && self.hi.is_finite()) {
            return Err(InferenceError::InvalidGrid("grid bounds must be finite".into()));
        }
        if self.points < 3 || self.points % 2 == 0 {
            return Err(InferenceError::InvalidGrid(format!(
                "Simpson weights need an odd number of points >= 3, got {}",
                self.points
            )));
        }
        if self.log_spaced && !(self.lo > T::zero()) {
            return Err(InferenceError::InvalidGrid("log-spaced axis needs lo > 0".into()));
        }
        if self.hi < self.lo {
            return Err(InferenceError::InvalidGrid(format!("hi {} < lo {}", self.hi, self.lo)));
        }
        Ok(())
    }

    /// Nodes and composite-Simpson weights in the axis variable.
    pub fn nodes_and_weights(&self) -> (Vec<T>, Vec<T>) {
        let n = self.points;
        let (a, b) = if self.log_spaced {
            (self.lo.ln(), self.hi.ln())
        } else {
            (self.lo, self.hi)
        };
        let h = (b - a) / T::of(n - 1);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let u = if i == n - 1 { b } else { a + h * T::of(i) };
            let c = if i == 0 || i == n - 1 {
                T::one()
            } else if i % 2 == 1 {
                T::lit(4.0)
            } else {
                T::lit(2.0)
            };
            let w = c * h / T::lit(3.0);
            if self.log_spaced {
                let x = u.exp();
                nodes.push(x);
                weights.push(w * x);
            } else {
                nodes.push(u);
                weights.push(w);
            }
        }
        (nodes, weights)
    }
}

/// Tensor-product grid over parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub axes: Vec<GridAxis<T>>,
}

impl<T: Real> Grid<T> {
    pub fn new(axes: Vec<GridAxis<T>>) -> Result<Self, InferenceError> {
        if axes.is_empty() {
            return Err(InferenceError::InvalidGrid("grid has no axes".into()));
        }
        for a in &axes {
            a.validate()?;
        }
        Ok(Self { axes })
    }

    /// Uniform grid with the default resolution on every axis.
    pub fn uniform(bounds: &[(T, T)]) -> Result<Self, InferenceError> {
        Self::new(
            bounds
                .iter()
                .map(|&(lo, hi)| GridAxis::linear(lo, hi, DEFAULT_GRID_POINTS))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            idx[d] = flat % self.axes[d].points;
            flat /= self.axes[d].points;
        }
        idx
    }

    /// All nodes (last axis fastest) and their cell volumes.
    pub fn points_and_volumes(&self) -> (Vec<Vec<T>>, Vec<T>, Vec<bool>) {
        let per: Vec<(Vec<T>, Vec<T>)> = self.axes.iter().map(|a| a.nodes_and_weights()).collect();
        let n = self.len();
        let mut pts = Vec::with_capacity(n);
        let mut vols = Vec::with_capacity(n);
        let mut edge = Vec::with_capacity(n);
        for k in 0..n {
            let idx = self.multi_index(k);
            pts.push(idx.iter().enumerate().map(|(d, &i)| per[d].0[i]).collect());
            vols.push(idx.iter().enumerate().fold(T::one(), |acc, (d, &i)| acc * per[d].1[i]));
            edge.push(
                idx.iter()
                    .enumerate()
                    .any(|(d, &i)| i == 0 || i + 1 == self.axes[d].points),
            );
        }
        (pts, vols, edge)
    }
}

// --------------------------------------------------------- grid posteriors

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedPosterior<T> {
    pub grid: Grid<T>,
    pub points: Vec<Vec<T>>,
    pub volumes: Vec<T>,
    pub log_unnorm: Vec<T>,
    pub log_evidence: T,
    pub scale: EvidenceScale,
    /// Share of the mass sitting on the outermost grid nodes.
    pub boundary_mass: T,
}

impl<T: Real> GriddedPosterior<T> {
    /// Normalizes `log_unnorm` evaluated at the grid nodes.
    pub fn from_log_values(grid: Grid<T>, log_unnorm: Vec<T>, scale: EvidenceScale) -> Result<Self, InferenceError> {
        let (points, volumes, edge) = grid.points_and_volumes();
        if log_unnorm.len() != points.len() {
            return Err(InferenceError::Shape(format!(
                "{} log values for {} grid nodes",
                log_unnorm.len(),
                points.len()
            )));
        }
        if log_unnorm.iter().any(|v| v.is_nan()) {
            return Err(InferenceError::Integration(OracleError::NonFinite {
                at: points[log_unnorm.iter().position(|v| v.is_nan()).unwrap_or(0)]
                    .iter()
                    .map(|v| v.f64())
                    .collect(),
            }));
        }
        let weighted: Vec<T> = log_unnorm.iter().zip(&volumes).map(|(&l, &v)| l + v.ln()).collect();
        let log_evidence = log_sum_exp(&weighted);
        if !log_evidence.is_finite() {
            return Err(InferenceError::EmptySupport(
                "log posterior is -inf at every grid node".into(),
            ));
        }
        let boundary_mass = weighted
            .iter()
            .zip(&edge)
            .filter(|(_, &e)| e)
            .map(|(&w, _)| (w - log_evidence).exp())
            .sum::<T>();
        if boundary_mass > T::lit(MASS_LEAK_THRESHOLD) {
            log::warn!(
                "posterior mass on grid boundary is {:.3e}; the grid may not cover the posterior",
                boundary_mass.f64()
            );
        }
        Ok(Self {
            grid,
            points,
            volumes,
            log_unnorm,
            log_evidence,
            scale,
            boundary_mass,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn leaks_mass(&self) -> bool {
        self.boundary_mass > T::lit(MASS_LEAK_THRESHOLD)
    }

    /// Normalized density at each node.
    pub fn densities(&self) -> Vec<T> {
        self.log_unnorm.iter().map(|&l| (l - self.log_evidence).exp()).collect()
    }

    /// Probability carried by each node (density times cell volume).
    pub fn probabilities(&self) -> Vec<T> {
        self.densities()
            .into_iter()
            .zip(&self.volumes)
            .map(|(d, &v)| d * v)
            .collect()
    }

    pub fn expectation(&self, g: impl Fn(&[T]) -> T) -> T {
        self.probabilities()
            .iter()
            .zip(&self.points)
            .map(|(&p, x)| p * g(x))
            .sum()
    }

    pub fn mean(&self) -> Vec<T> {
        let p = self.probabilities();
        (0..self.dim())
            .map(|d| p.iter().zip(&self.points).map(|(&w, x)| w * x[d]).sum())
            .collect()
    }

    pub fn covariance(&self) -> Matrix<T> {
        let p = self.probabilities();
        let m = self.mean();
        let n = self.dim();
        let mut c = Matrix::zeros(n);
        for (w, x) in p.iter().zip(&self.points) {
            for i in 0..n {
                for j in 0..n {
                    c[(i, j)] += *w * (x[i] - m[i]) * (x[j] - m[j]);
                }
            }
        }
        c
    }

    /// Marginal density along one axis: (nodes, density).
    pub fn marginal(&self, axis: usize) -> Result<(Vec<T>, Vec<T>), InferenceError> {
        if axis >= self.dim() {
            return Err(InferenceError::Shape(format!("axis {axis} of a {}-D grid", self.dim())));
        }
        let (nodes, weights) = self.grid.axes[axis].nodes_and_weights();
        let mut mass = vec![T::zero(); nodes.len()];
        for (k, p) in self.probabilities().into_iter().enumerate() {
            mass[self.grid.multi_index(k)[axis]] += p;
        }
        let dens = mass.iter().zip(&weights).map(|(&m, &w)| m / w).collect();
        Ok((nodes, dens))
    }

    /// ½ Σ |p − q|·vol against a normalized density q.
    pub fn total_variation_to(&self, q: impl Fn(&[T]) -> T) -> T {
        let half = T::lit(0.5);
        self.densities()
            .iter()
            .zip(&self.points)
            .zip(&self.volumes)
            .map(|((&p, x), &v)| (p - q(x)).abs() * v)
            .sum::<T>()
            * half
    }

    /// Total variation against another posterior on the same grid.
    pub fn total_variation(&self, other: &Self) -> Result<T, InferenceError> {
        if self.grid != other.grid {
            return Err(InferenceError::Shape("posteriors live on different grids".into()));
        }
        let q = other.densities();
        Ok(self
            .densities()
            .iter()
            .zip(&q)
            .zip(&self.volumes)
            .map(|((&a, &b), &v)| (a - b).abs() * v)
            .sum::<T>()
            * T::lit(0.5))
    }
}

/// Posterior of `model` on `grid` given independent observations `data`.
pub fn posterior_on_grid<T: Real>(
    model: &LogDensityModel<T>,
    prior: &Prior<T>,
    data: &[Vec<T>],
    grid: &Grid<T>,
) -> Result<GriddedPosterior<T>, InferenceError> {
    if grid.dim() != model.param_dim() {
        return Err(InferenceError::Shape(format!(
            "{}-D grid for a {}-parameter model",
            grid.dim(),
            model.param_dim()
        )));
    }
    let (points, _, _) = grid.points_and_volumes();
    let log_unnorm: Vec<T> = points.par_iter().map(|a| log_joint(model, prior, data, a)).collect();
    GriddedPosterior::from_log_values(grid.clone(), log_unnorm, prior.scale())
}

/// Posterior over a 1-D continuous hyper-parameter k from per-k evidences
/// and a hyper-prior; every evidence must be absolute.
pub fn hyper_posterior_1d<T: Real>(
    log_evidence: impl Fn(T) -> Result<Evidence<T>, InferenceError> + Sync,
    log_hyper_prior: &Prior<T>,
    axis: GridAxis<T>,
) -> Result<GriddedPosterior<T>, InferenceError> {
    let grid = Grid::new(vec![axis])?;
    let (points, _, _) = grid.points_and_volumes();
    let vals: Result<Vec<T>, InferenceError> = points
        .par_iter()
        .map(|k| {
            let e = log_evidence(k[0])?;
            if e.scale == EvidenceScale::UpToConstant {
                return Err(InferenceError::IncomparableEvidence {
                    label: format!("k = {}", k[0]),
                });
            }
            Ok(e.ln_value + log_hyper_prior.log_density(k))
        })
        .collect();
    GriddedPosterior::from_log_values(grid, vals?, log_hyper_prior.scale())
}

fn log_joint<T: Real>(model: &LogDensityModel<T>, prior: &Prior<T>, data: &[Vec<T>], alpha: &[T]) -> T {
    if !model.support().contains(alpha) {
        return T::neg_infinity();
    }
    let lp = prior.log_density(alpha);
    if lp == T::neg_infinity() {
        return lp;
    }
    lp + model.log_likelihood(data, alpha)
}

// ----------------------------------------------------------------- evidence

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence<T> {
    pub ln_value: T,
    /// Absolute error estimate of ln Z.
    pub ln_error: T,
    pub scale: EvidenceScale,
}

impl<T: Real> Evidence<T> {
    pub fn absolute(ln_value: T) -> Self {
        Self {
            ln_value,
            ln_error: T::zero(),
            scale: EvidenceScale::Absolute,
        }
    }

    pub fn up_to_constant(ln_value: T) -> Self {
        Self {
            ln_value,
            ln_error: T::zero(),
            scale: EvidenceScale::UpToConstant,
        }
    }

    pub fn value(&self) -> T {
        self.ln_value.exp()
    }
}

fn unit_to_axis<T: Real>(iv: &Interval<T>, u: T) -> T {
    let one = T::one();
    match (iv.lo.is_finite(), iv.hi.is_finite()) {
        (true, true) => iv.lo + (iv.hi - iv.lo) * u,
        (true, false) => iv.lo + u / (one - u),
        (false, true) => iv.hi - (one - u) / u,
        (false, false) => (u - T::lit(0.5)) / (u * (one - u)),
    }
}

/// ln ∫ e^{f} over a box, shifting by the maximum found on a coarse scan so
/// that evidences far below the smallest float stay representable.
fn ln_integral<T: Real>(
    f: &(dyn Fn(&[T]) -> T + Sync),
    domain: &[Interval<T>],
    hints: &[Vec<T>],
    spec: &IntegrationSpec<T>,
) -> Result<(T, T), InferenceError> {
    if domain.is_empty() {
        return Err(InferenceError::EmptySupport("no parameter axes".into()));
    }
    if let Some(iv) = domain.iter().find(|iv| !(iv.hi > iv.lo)) {
        return Err(InferenceError::EmptySupport(format!(
            "zero-width parameter interval [{}, {}]; evidence is 0",
            iv.lo, iv.hi
        )));
    }
    let d = domain.len();
    let per_axis = ((50_000f64).powf(1.0 / d as f64).floor() as usize).clamp(3, 65);
    let total = per_axis.pow(d as u32);
    let scan: Vec<(T, Vec<T>)> = (0..total)
        .into_par_iter()
        .map(|mut k| {
            let mut x = vec![T::zero(); d];
            for a in (0..d).rev() {
                let u = (T::of(k % per_axis) + T::lit(0.5)) / T::of(per_axis);
                x[a] = unit_to_axis(&domain[a], u);
                k /= per_axis;
            }
            (f(&x), x)
        })
        .collect();
    let (peak, at) = scan
        .iter()
        .filter(|(v, _)| !v.is_nan())
        .fold(
            (T::neg_infinity(), None),
            |(m, a), (v, x)| if *v > m { (*v, Some(x)) } else { (m, a) },
        );
    let Some(at) = at else {
        return Err(InferenceError::EmptySupport(
            "integrand is zero on the whole domain".into(),
        ));
    };
    let mut all_hints: Vec<Vec<T>> = (0..d).map(|a| hints.get(a).cloned().unwrap_or_default()).collect();
    for (a, h) in all_hints.iter_mut().enumerate() {
        h.push(at[a]);
    }
    let est = integrate_nd_with_hints(
        |x: &[T]| {
            let v = f(x);
            if v == T::neg_infinity() {
                T::zero()
            } else {
                (v - peak).exp()
            }
        },
        &Domain::Box(domain.to_vec()),
        &all_hints,
        spec,
    )
    .map_err(|e| match e {
        OracleError::ToleranceNotMet { value, error, evals } if domain.iter().any(|iv| !iv.is_finite()) => {
            InferenceError::Divergent(format!(
                "no convergence on an unbounded domain after {evals} evaluations (estimate {value:e} +/- {error:e})"
            ))
        }
        other => InferenceError::Integration(other),
    })?;
    if !(est.value > T::zero()) {
        return Err(InferenceError::EmptySupport("evidence integral is zero".into()));
    }
    if !est.value.is_finite() {
        return Err(InferenceError::Divergent("evidence integral is not finite".into()));
    }
    Ok((peak + est.value.ln(), est.error / est.value))
}

/// Z = ∫ L(α | data) π(α) dα over `domain`. Improper priors give an evidence
/// tagged up-to-constant.
pub fn marginal_likelihood<T: Real>(
    model: &LogDensityModel<T>,
    prior: &Prior<T>,
    data: &[Vec<T>],
    domain: &[Interval<T>],
    spec: &IntegrationSpec<T>,
) -> Result<Evidence<T>, InferenceError> {
    marginal_likelihood_with_hints(model, prior, data, domain, &[], spec)
}

/// As [`marginal_likelihood`], with breakpoints per parameter axis.
pub fn marginal_likelihood_with_hints<T: Real>(
    model: &LogDensityModel<T>,
    prior: &Prior<T>,
    data: &[Vec<T>],
    domain: &[Interval<T>],
    hints: &[Vec<T>],
    spec: &IntegrationSpec<T>,
) -> Result<Evidence<T>, InferenceError> {
    if domain.len() != model.param_dim() {
        return Err(InferenceError::Shape(format!(
            "{}-D domain for a {}-parameter model",
            domain.len(),
            model.param_dim()
        )));
    }
    let f = |a: &[T]| log_joint(model, prior, data, a);
    let (ln_value, ln_error) = ln_integral(&f, domain, hints, spec)?;
    Ok(Evidence {
        ln_value,
        ln_error,
        scale: prior.scale(),
    })
}

// ----------------------------------------------------------------- ensembles

pub type EvidenceFn<T, D> = Box<dyn Fn(&D) -> Result<Evidence<T>, InferenceError> + Send + Sync>;

pub struct EnsembleMember<T, D: ?Sized> {
    pub label: String,
    pub evidence: EvidenceFn<T, D>,
    pub prior_weight: T,
}

/// Mutually exclusive models with prior probabilities summing to one.
pub struct ModelEnsemble<T, D: ?Sized> {
    members: Vec<EnsembleMember<T, D>>,
}

impl<T: Real, D: ?Sized + Sync> ModelEnsemble<T, D> {
    pub fn new(members: Vec<EnsembleMember<T, D>>) -> Result<Self, InferenceError> {
        if members.is_empty() {
            return Err(InferenceError::InvalidEnsemble("no models".into()));
        }
        let mut seen = HashSet::new();
        for m in &members {
            if !seen.insert(m.label.as_str()) {
                return Err(InferenceError::InvalidEnsemble(format!("duplicate label {}", m.label)));
            }
            if !(m.prior_weight >= T::zero()) {
                return Err(InferenceError::InvalidEnsemble(format!(
                    "prior weight of {} is {}",
                    m.label, m.prior_weight
                )));
            }
        }
        let total: T = members.iter().map(|m| m.prior_weight).sum();
        if (total - T::one()).abs() > T::lit(1e-10) {
            return Err(InferenceError::InvalidEnsemble(format!("prior weights sum to {total}")));
        }
        Ok(Self { members })
    }

    /// Equal prior weight on every model.
    pub fn uniform(models: Vec<(String, EvidenceFn<T, D>)>) -> Result<Self, InferenceError> {
        let w = T::one() / T::of(models.len().max(1));
        Self::new(
            models
                .into_iter()
                .map(|(label, evidence)| EnsembleMember {
                    label,
                    evidence,
                    prior_weight: w,
                })
                .collect(),
        )
    }

    pub fn labels(&self) -> Vec<&str> {
        self.members.iter().map(|m| m.label.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPosterior<T> {
    pub labels: Vec<String>,
    pub weights: Vec<T>,
    pub ln_evidence: Vec<T>,
}

impl<T: Real> ModelPosterior<T> {
    pub fn get(&self, label: &str) -> Option<T> {
        self.labels.iter().position(|l| l == label).map(|i| self.weights[i])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// All weight on the model at `index`.
    pub fn delta(labels: Vec<String>, index: usize) -> Self {
        let weights = (0..labels.len())
            .map(|i| if i == index { T::one() } else { T::zero() })
            .collect();
        Self {
            ln_evidence: vec![T::nan(); labels.len()],
            labels,
            weights,
        }
    }
}

/// Posterior model probabilities ∝ Z(data | k) π(k).
pub fn model_posterior<T: Real, D: ?Sized + Sync>(
    ensemble: &ModelEnsemble<T, D>,
    data: &D,
) -> Result<ModelPosterior<T>, InferenceError> {
    let evidences: Result<Vec<Evidence<T>>, InferenceError> =
        ensemble.members.par_iter().map(|m| (m.evidence)(data)).collect();
    let evidences = evidences?;
    for (m, e) in ensemble.members.iter().zip(&evidences) {
        if e.scale == EvidenceScale::UpToConstant {
            return Err(InferenceError::IncomparableEvidence { label: m.label.clone() });
        }
    }
    let ln_w: Vec<T> = ensemble
        .members
        .iter()
        .zip(&evidences)
        .map(|(m, e)| {
            if m.prior_weight > T::zero() {
                e.ln_value + m.prior_weight.ln()
            } else {
                T::neg_infinity()
            }
        })
        .collect();
    let total = log_sum_exp(&ln_w);
    if !total.is_finite() {
        return Err(InferenceError::EmptySupport("every model has zero evidence".into()));
    }
    Ok(ModelPosterior {
        labels: ensemble.members.iter().map(|m| m.label.clone()).collect(),
        weights: ln_w.iter().map(|&l| (l - total).exp()).collect(),
        ln_evidence: evidences.iter().map(|e| e.ln_value).collect(),
    })
}

// ----------------------------------------------------------------- averaging

/// Per-model summary of the measurand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Summary<T> {
    Moments {
        mean: Vec<T>,
        covariance: Vec<Vec<T>>,
    },
    /// Density values on shared nodes.
    Density {
        nodes: Vec<Vec<T>>,
        values: Vec<T>,
    },
}

impl<T: Real> Summary<T> {
    pub fn scalar(mean: T, variance: T) -> Self {
        Summary::Moments {
            mean: vec![mean],
            covariance: vec![vec![variance]],
        }
    }

    pub fn mean(&self) -> Option<&[T]> {
        match self {
            Summary::Moments { mean, .. } => Some(mean),
            Summary::Density { .. } => None,
        }
    }

    fn check_like(&self, other: &Self) -> Result<(), InferenceError> {
        match (self, other) {
            (
                Summary::Moments {
                    mean: a,
                    covariance: ca,
                },
                Summary::Moments {
                    mean: b,
                    covariance: cb,
                },
            ) => {
                if a.len() != b.len() || ca.len() != cb.len() || ca.iter().zip(cb).any(|(r, s)| r.len() != s.len()) {
                    return Err(InferenceError::Shape(format!(
                        "moments of dimension {} and {}",
                        a.len(),
                        b.len()
                    )));
                }
                if ca.len() != a.len() {
                    return Err(InferenceError::Shape("covariance does not match mean".into()));
                }
            }
            (Summary::Density { nodes: a, values: va }, Summary::Density { nodes: b, values: vb }) => {
                if a != b || va.len() != vb.len() || va.len() != a.len() {
                    return Err(InferenceError::Shape("densities on different nodes".into()));
                }
            }
            _ => return Err(InferenceError::Shape("cannot mix moments and densities".into())),
        }
        Ok(())
    }
}

/// Mixture of per-model summaries with the given weights: the mixture density,
/// or the mixture mean Σ wₖ mₖ with covariance Σ wₖ (Cₖ + mₖmₖᵀ) − m mᵀ.
pub fn model_average<T: Real>(
    summaries: &[Summary<T>],
    weights: &ModelPosterior<T>,
) -> Result<Summary<T>, InferenceError> {
    average_weighted(summaries, &weights.weights)
}

/// Mixture over a gridded hyper-posterior: each node contributes its
/// probability times `summary_at(node)`.
pub fn average_over_grid<T: Real>(
    hyper: &GriddedPosterior<T>,
    summary_at: impl Fn(&[T]) -> Summary<T> + Sync,
) -> Result<Summary<T>, InferenceError> {
    let summaries: Vec<Summary<T>> = hyper.points.par_iter().map(|k| summary_at(k)).collect();
    average_weighted(&summaries, &hyper.probabilities())
}

fn average_weighted<T: Real>(summaries: &[Summary<T>], w: &[T]) -> Result<Summary<T>, InferenceError> {
    if summaries.len() != w.len() {
        return Err(InferenceError::Shape(format!(
            "{} summaries for {} weights",
            summaries.len(),
            w.len()
        )));
    }
    let Some(first) = summaries.first() else {
        return Err(InferenceError::Shape("nothing to average".into()));
    };
    for s in summaries {
        first.check_like(s)?;
    }
    if w.iter().any(|&v| !(v >= T::zero())) {
        return Err(InferenceError::InvalidEnsemble("negative or NaN weight".into()));
    }
    Ok(match first {
        Summary::Moments { mean, .. } => {
            let n = mean.len();
            let mut m = vec![T::zero(); n];
            let mut second = vec![vec![T::zero(); n]; n];
            for (s, &wk) in summaries.iter().zip(w) {
                if wk == T::zero() {
                    continue;
                }
                let Summary::Moments {
                    mean: mk,
                    covariance: ck,
                } = s
                else {
                    unreachable!()
                };
                for i in 0..n {
                    m[i] += wk * mk[i];
                    for j in 0..n {
                        second[i][j] += wk * (ck[i][j] + mk[i] * mk[j]);
                    }
                }
            }
            let covariance = (0..n)
                .map(|i| (0..n).map(|j| second[i][j] - m[i] * m[j]).collect())
                .collect();
            Summary::Moments { mean: m, covariance }
        }
        Summary::Density { nodes, .. } => {
            let mut values = vec![T::zero(); nodes.len()];
            for (s, &wk) in summaries.iter().zip(w) {
                let Summary::Density { values: vk, .. } = s else {
                    unreachable!()
                };
                for (v, &x) in values.iter_mut().zip(vk) {
                    *v += wk * x;
                }
            }
            Summary::Density {
                nodes: nodes.clone(),
                values,
            }
        }
    })
}
