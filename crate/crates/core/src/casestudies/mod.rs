//! Closed-form analyses of six classic prior paradoxes, each with numerical
//! counterparts used to check it.

pub mod gauss_stdmean;
pub mod marginalization;
pub mod multinomial;
pub mod multinormal;
pub mod neyman_scott;
pub mod stein;

use crate::geometry::GeometryError;
use crate::inference::InferenceError;
use crate::oracle::OracleError;
use crate::specfun::SpecFunError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseStudyError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{what} is undefined for {param} = {got}; needs {param} >= {need}")]
    MomentUndefined {
        what: &'static str,
        param: &'static str,
        got: f64,
        need: f64,
    },
    #[error("infeasible model: {0}")]
    Infeasible(String),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type CaseResult<T> = Result<T, CaseStudyError>;

/// A named table of numbers with column labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Output of a case study: named scalars plus tables, ready for emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyReport {
    pub name: String,
    pub scalars: Vec<(String, f64)>,
    pub tables: Vec<Table>,
}

impl CaseStudyReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            scalars: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn scalar(&mut self, key: impl Into<String>, value: f64) {
        self.scalars.push((key.into(), value));
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub(crate) fn need_min(what: &'static str, param: &'static str, got: usize, need: usize) -> CaseResult<()> {
    if got < need {
        return Err(CaseStudyError::MomentUndefined {
            what,
            param,
            got: got as f64,
            need: need as f64,
        });
    }
    Ok(())
}

pub(crate) fn need_positive<T: crate::Real>(name: &str, v: T) -> CaseResult<()> {
    if !(v > T::zero()) || !v.is_finite() {
        return Err(CaseStudyError::Domain(format!(
            "{name} = {v} must be positive and finite"
        )));
    }
    Ok(())
}

/// Maximizes a unimodal function on [lo, hi] by golden-section search.
pub(crate) fn golden_max<T: crate::Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T, tol: T) -> T {
    let g = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (hi - lo).abs() <= tol * (T::one() + c.abs()) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) * T::lit(0.5)
}

/// ∫₀^∞ f(z) dz computed as ∫ f(eᵘ)eᵘ du over ℝ, which turns algebraic
/// tails into exponential ones. `points` are breakpoints in z.
pub(crate) fn integrate_positive_log<T: crate::Real>(
    f: impl Fn(T) -> T + Sync,
    points: &[T],
    spec: &crate::oracle::IntegrationSpec<T>,
) -> CaseResult<crate::oracle::OracleEstimate<T>> {
    let g = |u: T| {
        let z = u.exp();
        if z == T::zero() || !z.is_finite() {
            return T::zero();
        }
        f(z) * z
    };
    let logs: Vec<T> = points.iter().filter(|&&p| p > T::zero()).map(|p| p.ln()).collect();
    Ok(crate::oracle::integrate_1d_with_points(
        g,
        T::neg_infinity(),
        T::infinity(),
        &logs,
        spec,
    )?)
}
