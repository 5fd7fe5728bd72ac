//! Independent verification engines: nested adaptive Gauss–Kronrod
//! quadrature, seeded Monte Carlo and finite-difference derivatives.
//!
//! Monte-Carlo work is split into fixed chunks of [`MC_CHUNK`] draws. Chunk
//! `c` always uses ChaCha20 stream `c` of the run seed, and chunk results are
//! merged in chunk order, so estimates are bit-identical whatever the number
//! of worker threads.

use crate::linalg::Matrix;
use crate::real::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

/// RNG used by every Monte-Carlo routine.
pub type OracleRng = ChaCha20Rng;

/// Identifies the random stream layout; recorded in output metadata.
pub const RNG_VERSION: &str = "chacha20(rand_chacha 0.9) stream-per-chunk/4096";

/// Draws per Monte-Carlo chunk.
pub const MC_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    AdaptiveQuadrature,
    MonteCarlo,
    ExactSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationSpec<T> {
    pub scheme: Scheme,
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_evals: usize,
    pub seed: u64,
}

impl<T: Real> IntegrationSpec<T> {
    pub fn quadrature(rel_tol: T) -> Self {
        Self {
            scheme: Scheme::AdaptiveQuadrature,
            abs_tol: T::min_positive_value(),
            rel_tol,
            max_evals: 20_000_000,
            seed: 0,
        }
    }

    /// Plain Monte Carlo with `samples` draws and no accuracy target.
    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            scheme: Scheme::MonteCarlo,
            abs_tol: T::infinity(),
            rel_tol: T::infinity(),
            max_evals: samples,
            seed,
        }
    }

    pub fn exact_sum() -> Self {
        Self {
            scheme: Scheme::ExactSum,
            abs_tol: T::infinity(),
            rel_tol: T::infinity(),
            max_evals: usize::MAX,
            seed: 0,
        }
    }

    pub fn with_abs_tol(mut self, abs_tol: T) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: T) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.abs_tol > T::zero()) || !(self.rel_tol > T::zero()) {
            return Err(OracleError::InvalidSpec(format!(
                "tolerances must be positive (abs {}, rel {})",
                self.abs_tol, self.rel_tol
            )));
        }
        if self.max_evals == 0 {
            return Err(OracleError::InvalidSpec("max_evals must be positive".into()));
        }
        Ok(())
    }

    fn tolerance(&self, value: T) -> T {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

impl<T: Real> Default for IntegrationSpec<T> {
    fn default() -> Self {
        Self::quadrature(T::lit(1e-10))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    /// Monte-Carlo standard error.
    StdError,
    /// Quadrature error estimate.
    ErrorBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate<T> {
    pub value: T,
    pub error: T,
    pub kind: ErrorKind,
    pub evals_used: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("invalid integration spec: {0}")]
    InvalidSpec(String),
    #[error("tolerance not met after {evals} evaluations; best estimate {value:e} +/- {error:e}")]
    ToleranceNotMet { value: f64, error: f64, evals: usize },
    #[error("integrand is not finite at {at:?}")]
    NonFinite { at: Vec<f64> },
    #[error("domain error: {0}")]
    Domain(String),
}

/// A closed or half/fully unbounded interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        Self { lo, hi }
    }

    pub fn real_line() -> Self {
        Self::new(T::neg_infinity(), T::infinity())
    }

    pub fn positive() -> Self {
        Self::new(T::zero(), T::infinity())
    }

    pub fn unit() -> Self {
        Self::new(T::zero(), T::one())
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain<T> {
    /// Cartesian product of intervals; unbounded sides are compactified.
    Box(Vec<Interval<T>>),
    /// Probability simplex of `k` components; integration is over the first
    /// k−1 coordinates and the integrand receives all k.
    Simplex(usize),
    /// Finite point set for exact summation.
    Points(Vec<Vec<T>>),
}

// ------------------------------------------------------ Gauss–Kronrod core

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

type VecFn<'a, T> = dyn FnMut(T) -> Result<Vec<T>, OracleError> + 'a;

/// One G7K15 panel: (Kronrod estimate, QUADPACK-style error) per component.
fn gk15<T: Real>(f: &mut VecFn<'_, T>, a: T, b: T, width: usize) -> Result<(Vec<T>, Vec<T>), OracleError> {
    let c = (a + b) * T::lit(0.5);
    let h = (b - a) * T::lit(0.5);
    let mut fv: Vec<Vec<T>> = Vec::with_capacity(15);
    for (k, &x) in XGK.iter().enumerate() {
        if k == 7 {
            fv.push(f(c)?);
        } else {
            let dx = h * T::lit(x);
            fv.push(f(c - dx)?);
            fv.push(f(c + dx)?);
        }
    }
    let mut res = vec![T::zero(); width];
    let mut err = vec![T::zero(); width];
    for comp in 0..width {
        let val = |k: usize, side: usize| fv[2 * k + side][comp];
        let centre = fv[14][comp];
        let mut rk = T::lit(WGK[7]) * centre;
        let mut rg = T::lit(WG[3]) * centre;
        let mut rabs = rk.abs();
        for k in 0..7 {
            let (l, r) = (val(k, 0), val(k, 1));
            rk += T::lit(WGK[k]) * (l + r);
            rabs += T::lit(WGK[k]) * (l.abs() + r.abs());
            if k % 2 == 1 {
                rg += T::lit(WG[k / 2]) * (l + r);
            }
        }
        let mean = rk * T::lit(0.5);
        let mut rasc = T::lit(WGK[7]) * (centre - mean).abs();
        for k in 0..7 {
            rasc += T::lit(WGK[k]) * ((val(k, 0) - mean).abs() + (val(k, 1) - mean).abs());
        }
        let hab = h.abs();
        let (rk, rabs, rasc) = (rk * h, rabs * hab, rasc * hab);
        let mut e = (rk - rg * h).abs();
        if rasc != T::zero() && e != T::zero() {
            e = rasc * T::one().min((T::lit(200.0) * e / rasc).powf(T::lit(1.5)));
        }
        let floor = T::lit(50.0) * T::epsilon() * rabs;
        if rabs > T::min_positive_value() / (T::lit(50.0) * T::epsilon()) {
            e = e.max(floor);
        }
        res[comp] = rk;
        err[comp] = e;
    }
    Ok((res, err))
}

struct Segment<T> {
    a: T,
    b: T,
    val: Vec<T>,
    err: Vec<T>,
}

struct HeapItem<T> {
    key: T,
    idx: usize,
}

impl<T: PartialOrd> PartialEq for HeapItem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key.partial_cmp(&other.key) == Some(Ordering::Equal)
    }
}
impl<T: PartialOrd> Eq for HeapItem<T> {}
impl<T: PartialOrd> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: PartialOrd> Ord for HeapItem<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.partial_cmp(&other.key).unwrap_or(Ordering::Equal)
    }
}

struct Budget {
    used: Cell<usize>,
    max: usize,
}

struct Tol<T> {
    abs: T,
    rel: T,
}

/// Globally adaptive G7K15 on a finite interval for a vector integrand.
/// Only the first `n_conv` components drive convergence; any further
/// components are integrated along for bookkeeping.
fn adaptive<T: Real>(
    f: &mut VecFn<'_, T>,
    breaks: &[T],
    width: usize,
    n_conv: usize,
    tol: &Tol<T>,
    budget: &Budget,
) -> Result<(Vec<T>, Vec<T>), OracleError> {
    let mut segs: Vec<Segment<T>> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut total = vec![T::zero(); width];
    let mut total_err = vec![T::zero(); width];
    let norm_err = |e: &[T]| e[..n_conv].iter().copied().fold(T::zero(), T::max);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (v, e) = gk15(f, a, b, width)?;
        budget.used.set(budget.used.get() + 15);
        for k in 0..width {
            total[k] += v[k];
            total_err[k] += e[k];
        }
        heap.push(HeapItem {
            key: norm_err(&e),
            idx: segs.len(),
        });
        segs.push(Segment { a, b, val: v, err: e });
    }
    let mut iterations = 0usize;
    loop {
        let scale = total[..n_conv].iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let target = tol.abs.max(tol.rel * scale);
        let err_now = norm_err(&total_err);
        if err_now <= target {
            return Ok((total, total_err));
        }
        let fail = || OracleError::ToleranceNotMet {
            value: total[0].f64(),
            error: err_now.f64(),
            evals: budget.used.get(),
        };
        let Some(item) = heap.pop() else {
            return Err(fail());
        };
        if budget.used.get() + 30 > budget.max {
            return Err(fail());
        }
        let seg = &segs[item.idx];
        let (a, b) = (seg.a, seg.b);
        let mid = (a + b) * T::lit(0.5);
        if !(mid > a && mid < b) || (b - a) <= T::lit(64.0) * T::epsilon() * a.abs().max(b.abs()) {
            // cannot refine further; the segment stays out of the heap
            continue;
        }
        let (v1, e1) = gk15(f, a, mid, width)?;
        let (v2, e2) = gk15(f, mid, b, width)?;
        budget.used.set(budget.used.get() + 30);
        for k in 0..width {
            total[k] += v1[k] + v2[k] - seg.val[k];
            total_err[k] += e1[k] + e2[k] - seg.err[k];
        }
        let idx = item.idx;
        segs[idx] = Segment {
            a,
            b: mid,
            val: v1,
            err: e1,
        };
        heap.push(HeapItem {
            key: norm_err(&segs[idx].err),
            idx,
        });
        heap.push(HeapItem {
            key: norm_err(&e2),
            idx: segs.len(),
        });
        segs.push(Segment {
            a: mid,
            b,
            val: v2,
            err: e2,
        });
        iterations += 1;
        if iterations % 64 == 0 {
            // refresh running sums against drift
            total = vec![T::zero(); width];
            total_err = vec![T::zero(); width];
            for s in &segs {
                for k in 0..width {
                    total[k] += s.val[k];
                    total_err[k] += s.err[k];
                }
            }
        }
    }
}

/// Maps an interval onto a finite parameter range.
#[derive(Debug, Clone, Copy)]
enum AxisMap<T> {
    Finite,
    /// [a, ∞): x = a + t/(1−t), t ∈ [0, 1)
    Upper(T),
    /// (−∞, b]: x = b − t/(1−t)
    Lower(T),
    /// ℝ: x = t/(1−t²), t ∈ (−1, 1)
    Whole,
}

impl<T: Real> AxisMap<T> {
    fn of(iv: &Interval<T>) -> Self {
        match (iv.lo.is_finite(), iv.hi.is_finite()) {
            (true, true) => AxisMap::Finite,
            (true, false) => AxisMap::Upper(iv.lo),
            (false, true) => AxisMap::Lower(iv.hi),
            (false, false) => AxisMap::Whole,
        }
    }

    fn t_range(&self, iv: &Interval<T>) -> (T, T) {
        match self {
            AxisMap::Finite => (iv.lo, iv.hi),
            AxisMap::Upper(_) | AxisMap::Lower(_) => (T::zero(), T::one()),
            AxisMap::Whole => (-T::one(), T::one()),
        }
    }

    /// (x, dx/dt); the Jacobian is infinite only at the excluded endpoints.
    fn x(&self, t: T) -> (T, T) {
        let one = T::one();
        match *self {
            AxisMap::Finite => (t, one),
            AxisMap::Upper(a) => {
                let d = one - t;
                (a + t / d, (d * d).recip())
            }
            AxisMap::Lower(b) => {
                let d = one - t;
                (b - t / d, (d * d).recip())
            }
            AxisMap::Whole => {
                let d = one - t * t;
                (t / d, (one + t * t) / (d * d))
            }
        }
    }

    fn t_of(&self, x: T) -> T {
        let one = T::one();
        match *self {
            AxisMap::Finite => x,
            AxisMap::Upper(a) => (x - a) / (one + x - a),
            AxisMap::Lower(b) => (b - x) / (one + b - x),
            AxisMap::Whole => {
                if x == T::zero() {
                    T::zero()
                } else {
                    T::lit(2.0) * x / (one + (one + T::lit(4.0) * x * x).sqrt())
                }
            }
        }
    }
}

fn breaks_for<T: Real>(iv: &Interval<T>, points: &[T]) -> (AxisMap<T>, Vec<T>) {
    let map = AxisMap::of(iv);
    let (t0, t1) = map.t_range(iv);
    let mut br = vec![t0];
    let mut inner: Vec<T> = points
        .iter()
        .filter(|&&p| p > iv.lo && p < iv.hi)
        .map(|&p| map.t_of(p))
        .filter(|&t| t > t0 && t < t1)
        .collect();
    if inner.is_empty() && !iv.is_finite() {
        // a few initial panels so narrow features off-centre are not missed
        let n = 8;
        inner = (1..n).map(|i| t0 + (t1 - t0) * T::of(i) / T::of(n)).collect();
    }
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    inner.dedup();
    br.extend(inner);
    br.push(t1);
    (map, br)
}

fn non_finite_at<T: Real>(x: &[T]) -> OracleError {
    OracleError::NonFinite {
        at: x.iter().map(|v| v.f64()).collect(),
    }
}

/// Nested quadrature. `limits(level, prefix)` gives the interval of axis
/// `level` given the outer coordinates; `hints(level)` gives optional
/// breakpoints on that axis.
#[allow(clippy::too_many_arguments)]
fn nested<T: Real>(
    f: &dyn Fn(&[T]) -> Result<Vec<T>, OracleError>,
    limits: &dyn Fn(usize, &[T]) -> Interval<T>,
    hints: &dyn Fn(usize) -> Vec<T>,
    dim: usize,
    prefix: &[T],
    width: usize,
    tol: &Tol<T>,
    budget: &Budget,
) -> Result<(Vec<T>, Vec<T>), OracleError> {
    let level = prefix.len();
    let iv = limits(level, prefix);
    if !(iv.hi > iv.lo) {
        return Ok((vec![T::zero(); width], vec![T::zero(); width]));
    }
    let (map, br) = breaks_for(&iv, &hints(level));
    let last = level + 1 == dim;
    let inner_tol = Tol {
        abs: tol.abs * T::lit(0.1),
        rel: (tol.rel * T::lit(0.1)).max(T::lit(64.0) * T::epsilon()),
    };
    let mut point = prefix.to_vec();
    point.push(T::zero());
    let mut g = |t: T| -> Result<Vec<T>, OracleError> {
        let (x, jac) = map.x(t);
        if !x.is_finite() || !jac.is_finite() {
            return Ok(vec![T::zero(); 2 * width]);
        }
        point[level] = x;
        let (v, e) = if last {
            (f(&point)?, vec![T::zero(); width])
        } else {
            nested(f, limits, hints, dim, &point, width, &inner_tol, budget)?
        };
        let mut out = Vec::with_capacity(2 * width);
        for k in 0..width {
            if !v[k].is_finite() {
                return Err(non_finite_at(&point));
            }
            out.push(if v[k] == T::zero() { T::zero() } else { v[k] * jac });
        }
        for k in 0..width {
            out.push(e[k].abs() * jac);
        }
        if out.iter().any(|o| !o.is_finite()) {
            return Err(non_finite_at(&point));
        }
        Ok(out)
    };
    let (val, err) = adaptive(&mut g, &br, 2 * width, width, tol, budget)?;
    let value = val[..width].to_vec();
    let error = (0..width).map(|k| err[k] + val[width + k]).collect();
    Ok((value, error))
}

/// Vector-valued integration over a box or simplex with adaptive quadrature,
/// with optional per-axis breakpoints. Returns values and error bounds.
pub fn integrate_vec<T: Real>(
    f: &dyn Fn(&[T]) -> Vec<T>,
    width: usize,
    domain: &Domain<T>,
    hints: &[Vec<T>],
    spec: &IntegrationSpec<T>,
) -> Result<(Vec<T>, Vec<T>, usize), OracleError> {
    spec.validate()?;
    if spec.scheme != Scheme::AdaptiveQuadrature {
        return Err(OracleError::InvalidSpec(
            "integrate_vec requires adaptive quadrature".into(),
        ));
    }
    let budget = Budget {
        used: Cell::new(0),
        max: spec.max_evals,
    };
    let tol = Tol {
        abs: spec.abs_tol,
        rel: spec.rel_tol,
    };
    let hint = |level: usize| hints.get(level).cloned().unwrap_or_default();
    let (v, e) = match domain {
        Domain::Box(axes) => {
            if axes.is_empty() {
                return Err(OracleError::InvalidSpec("empty box".into()));
            }
            let g = |x: &[T]| Ok(f(x));
            let limits = |level: usize, _: &[T]| axes[level];
            nested(&g, &limits, &hint, axes.len(), &[], width, &tol, &budget)?
        }
        Domain::Simplex(k) => {
            if *k < 2 {
                return Err(OracleError::InvalidSpec("simplex needs at least 2 components".into()));
            }
            let g = |x: &[T]| {
                let mut full = x.to_vec();
                let s: T = x.iter().copied().sum();
                full.push((T::one() - s).max(T::zero()));
                Ok(f(&full))
            };
            let limits = |_: usize, prefix: &[T]| {
                let s: T = prefix.iter().copied().sum();
                Interval::new(T::zero(), (T::one() - s).max(T::zero()))
            };
            nested(&g, &limits, &hint, k - 1, &[], width, &tol, &budget)?
        }
        Domain::Points(_) => {
            return Err(OracleError::InvalidSpec("point sets need the exact-sum scheme".into()));
        }
    };
    Ok((v, e, budget.used.get()))
}

/// Integrates `f` over `domain` with the scheme chosen in `spec`.
pub fn integrate_nd<T: Real, F: Fn(&[T]) -> T + Sync>(
    f: F,
    domain: &Domain<T>,
    spec: &IntegrationSpec<T>,
) -> Result<OracleEstimate<T>, OracleError> {
    integrate_nd_with_hints(f, domain, &[], spec)
}

/// As [`integrate_nd`], with breakpoints per axis for quadrature.
pub fn integrate_nd_with_hints<T: Real, F: Fn(&[T]) -> T + Sync>(
    f: F,
    domain: &Domain<T>,
    hints: &[Vec<T>],
    spec: &IntegrationSpec<T>,
) -> Result<OracleEstimate<T>, OracleError> {
    spec.validate()?;
    match spec.scheme {
        Scheme::AdaptiveQuadrature => {
            let g = |x: &[T]| vec![f(x)];
            let (v, e, evals) = integrate_vec(&g, 1, domain, hints, spec)?;
            Ok(OracleEstimate {
                value: v[0],
                error: e[0],
                kind: ErrorKind::ErrorBound,
                evals_used: evals,
            })
        }
        Scheme::MonteCarlo => monte_carlo(&f, domain, spec),
        Scheme::ExactSum => match domain {
            Domain::Points(points) => {
                let mut sum = T::zero();
                let mut abs = T::zero();
                for p in points {
                    let v = f(p);
                    if !v.is_finite() {
                        return Err(non_finite_at(p));
                    }
                    sum += v;
                    abs += v.abs();
                }
                Ok(OracleEstimate {
                    value: sum,
                    error: abs * T::epsilon() * T::of(points.len().max(1)),
                    kind: ErrorKind::ErrorBound,
                    evals_used: points.len(),
                })
            }
            _ => Err(OracleError::InvalidSpec("exact sum needs a point-set domain".into())),
        },
    }
}

/// One-dimensional convenience wrapper.
pub fn integrate_1d<T: Real, F: Fn(T) -> T + Sync>(
    f: F,
    lo: T,
    hi: T,
    spec: &IntegrationSpec<T>,
) -> Result<OracleEstimate<T>, OracleError> {
    integrate_nd(|x: &[T]| f(x[0]), &Domain::Box(vec![Interval::new(lo, hi)]), spec)
}

/// One-dimensional integration with interior breakpoints.
pub fn integrate_1d_with_points<T: Real, F: Fn(T) -> T + Sync>(
    f: F,
    lo: T,
    hi: T,
    points: &[T],
    spec: &IntegrationSpec<T>,
) -> Result<OracleEstimate<T>, OracleError> {
    integrate_nd_with_hints(
        |x: &[T]| f(x[0]),
        &Domain::Box(vec![Interval::new(lo, hi)]),
        &[points.to_vec()],
        spec,
    )
}

// ------------------------------------------------------------ Monte Carlo

#[derive(Clone, Copy)]
struct Moments<T> {
    n: usize,
    mean: T,
    m2: T,
}

impl<T: Real> Moments<T> {
    fn empty() -> Self {
        Self {
            n: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    fn push(&mut self, x: T) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / T::of(self.n);
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Self) -> Self {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        let (na, nb, nt) = (T::of(self.n), T::of(o.n), T::of(n));
        Self {
            n,
            mean: self.mean + d * nb / nt,
            m2: self.m2 + o.m2 + d * d * na * nb / nt,
        }
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> OracleRng {
    let mut rng = OracleRng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `n` draws of `draw` split into seeded chunks; deterministic for a
/// given `(n, seed)` regardless of thread count.
fn run_chunks<T: Real>(
    n: usize,
    seed: u64,
    draw: &(dyn Fn(&mut OracleRng) -> T + Sync),
) -> Result<Moments<T>, OracleError> {
    let chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<Result<Moments<T>, OracleError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut m = Moments::empty();
            for _ in 0..len {
                let v = draw(&mut rng);
                if !v.is_finite() {
                    return Err(OracleError::NonFinite { at: vec![] });
                }
                m.push(v);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::empty();
    for p in parts {
        total = total.merge(p?);
    }
    Ok(total)
}

fn estimate_from<T: Real>(m: Moments<T>, scale: T) -> OracleEstimate<T> {
    let var = if m.n > 1 { m.m2 / T::of(m.n - 1) } else { T::zero() };
    OracleEstimate {
        value: m.mean * scale,
        error: (var / T::of(m.n)).sqrt() * scale.abs(),
        kind: ErrorKind::StdError,
        evals_used: m.n,
    }
}

fn monte_carlo<T: Real, F: Fn(&[T]) -> T + Sync>(
    f: &F,
    domain: &Domain<T>,
    spec: &IntegrationSpec<T>,
) -> Result<OracleEstimate<T>, OracleError> {
    let n = spec.max_evals;
    if n < 2 {
        return Err(OracleError::InvalidSpec("Monte Carlo needs at least 2 draws".into()));
    }
    let est = match domain {
        Domain::Box(axes) => {
            let maps: Vec<(AxisMap<T>, T, T)> = axes
                .iter()
                .map(|iv| {
                    let m = AxisMap::of(iv);
                    let (t0, t1) = m.t_range(iv);
                    (m, t0, t1)
                })
                .collect();
            let draw = |rng: &mut OracleRng| {
                let mut x = Vec::with_capacity(maps.len());
                let mut w = T::one();
                for (m, t0, t1) in &maps {
                    let u: f64 = rng.random();
                    let t = *t0 + (*t1 - *t0) * T::lit(u);
                    let (xi, jac) = m.x(t);
                    if !xi.is_finite() || !jac.is_finite() {
                        return T::zero();
                    }
                    x.push(xi);
                    w *= (*t1 - *t0) * jac;
                }
                let v = f(&x);
                if v == T::zero() {
                    T::zero()
                } else {
                    v * w
                }
            };
            estimate_from(run_chunks(n, spec.seed, &draw)?, T::one())
        }
        Domain::Simplex(k) => {
            let k = *k;
            if k < 2 {
                return Err(OracleError::InvalidSpec("simplex needs at least 2 components".into()));
            }
            let draw = |rng: &mut OracleRng| {
                let mut e: Vec<T> = (0..k)
                    .map(|_| {
                        let u: f64 = rng.random();
                        T::lit(-(1.0 - u).ln())
                    })
                    .collect();
                let s: T = e.iter().copied().sum();
                for v in &mut e {
                    *v /= s;
                }
                f(&e)
            };
            // Lebesgue volume of the simplex in its first k−1 coordinates
            let ln_vol = -crate::specfun::ln_gamma_unchecked(T::of(k));
            estimate_from(run_chunks(n, spec.seed, &draw)?, ln_vol.exp())
        }
        Domain::Points(_) => {
            return Err(OracleError::InvalidSpec("point sets need the exact-sum scheme".into()));
        }
    };
    if est.error > spec.tolerance(est.value) {
        return Err(OracleError::ToleranceNotMet {
            value: est.value.f64(),
            error: est.error.f64(),
            evals: est.evals_used,
        });
    }
    Ok(est)
}

/// Sample mean of `g(X)` with `X` drawn by `sampler`, plus its standard error.
pub fn mc_expectation<T, X, S, G>(sampler: S, g: G, n: usize, seed: u64) -> Result<OracleEstimate<T>, OracleError>
where
    T: Real,
    S: Fn(&mut OracleRng) -> X + Sync,
    G: Fn(&X) -> T + Sync,
{
    if n < 2 {
        return Err(OracleError::InvalidSpec("mc_expectation needs n >= 2".into()));
    }
    let draw = |rng: &mut OracleRng| g(&sampler(rng));
    Ok(estimate_from(run_chunks(n, seed, &draw)?, T::one()))
}

/// Component-wise sample means of a vector-valued draw, with standard
/// errors; same chunked stream layout as [`mc_expectation`].
pub fn mc_mean_vec<T, S>(draw: S, width: usize, n: usize, seed: u64) -> Result<Vec<OracleEstimate<T>>, OracleError>
where
    T: Real,
    S: Fn(&mut OracleRng) -> Vec<T> + Sync,
{
    if n < 2 {
        return Err(OracleError::InvalidSpec("Monte Carlo needs at least 2 draws".into()));
    }
    let chunks = n.div_ceil(MC_CHUNK);
    let parts: Vec<Result<Vec<Moments<T>>, OracleError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut m = vec![Moments::empty(); width];
            for _ in 0..len {
                let v = draw(&mut rng);
                if v.len() != width || v.iter().any(|x| !x.is_finite()) {
                    return Err(OracleError::NonFinite { at: vec![] });
                }
                for (mk, &vk) in m.iter_mut().zip(&v) {
                    mk.push(vk);
                }
            }
            Ok(m)
        })
        .collect();
    let mut total = vec![Moments::empty(); width];
    for p in parts {
        let p = p?;
        for (t, q) in total.iter_mut().zip(p) {
            *t = t.merge(q);
        }
    }
    Ok(total.into_iter().map(|m| estimate_from(m, T::one())).collect())
}

// ------------------------------------------------------ finite differences

/// Step rule h = max(min, rel·|x|) per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy<T> {
    pub rel: T,
    pub min: T,
    pub richardson: bool,
}

impl<T: Real> Default for StepPolicy<T> {
    fn default() -> Self {
        Self {
            rel: T::lit(1e-4),
            min: T::lit(1e-4),
            richardson: false,
        }
    }
}

impl<T: Real> StepPolicy<T> {
    pub fn step(&self, x: T) -> T {
        self.min.max(self.rel * x.abs())
    }
}

fn checked<T: Real>(f: &dyn Fn(&[T]) -> T, x: &[T]) -> Result<T, OracleError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(OracleError::Domain(format!(
            "non-finite function value at {:?}",
            x.iter().map(|v| v.f64()).collect::<Vec<_>>()
        )))
    }
}

fn hessian_with_steps<T: Real>(f: &dyn Fn(&[T]) -> T, x: &[T], h: &[T]) -> Result<Matrix<T>, OracleError> {
    let p = x.len();
    let f0 = checked(f, x)?;
    let mut m = Matrix::zeros(p);
    let mut y = x.to_vec();
    for i in 0..p {
        y[i] = x[i] + h[i];
        let fp = checked(f, &y)?;
        y[i] = x[i] - h[i];
        let fm = checked(f, &y)?;
        y[i] = x[i];
        m[(i, i)] = (fp - T::lit(2.0) * f0 + fm) / (h[i] * h[i]);
        for j in (i + 1)..p {
            let mut eval = |si: T, sj: T| {
                y[i] = x[i] + si * h[i];
                y[j] = x[j] + sj * h[j];
                let v = checked(f, &y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let one = T::one();
            let v = (eval(one, one)? - eval(one, -one)? - eval(-one, one)? + eval(-one, -one)?)
                / (T::lit(4.0) * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Central-difference Hessian, symmetrized by construction.
pub fn finite_diff_hessian<T: Real>(
    f: &dyn Fn(&[T]) -> T,
    point: &[T],
    policy: &StepPolicy<T>,
) -> Result<Matrix<T>, OracleError> {
    let h: Vec<T> = point.iter().map(|&x| policy.step(x)).collect();
    let coarse = hessian_with_steps(f, point, &h)?;
    if !policy.richardson {
        return Ok(coarse);
    }
    let h2: Vec<T> = h.iter().map(|&v| v * T::lit(0.5)).collect();
    let fine = hessian_with_steps(f, point, &h2)?;
    let p = point.len();
    let mut out = Matrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            out[(i, j)] = (T::lit(4.0) * fine[(i, j)] - coarse[(i, j)]) / T::lit(3.0);
        }
    }
    Ok(out)
}

/// Central-difference gradient.
pub fn finite_diff_gradient<T: Real>(
    f: &dyn Fn(&[T]) -> T,
    point: &[T],
    policy: &StepPolicy<T>,
) -> Result<Vec<T>, OracleError> {
    let mut y = point.to_vec();
    let mut g = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let h = policy.step(point[i]);
        y[i] = point[i] + h;
        let fp = checked(f, &y)?;
        y[i] = point[i] - h;
        let fm = checked(f, &y)?;
        y[i] = point[i];
        let mut d = (fp - fm) / (T::lit(2.0) * h);
        if policy.richardson {
            let h2 = h * T::lit(0.5);
            y[i] = point[i] + h2;
            let fp2 = checked(f, &y)?;
            y[i] = point[i] - h2;
            let fm2 = checked(f, &y)?;
            y[i] = point[i];
            let d2 = (fp2 - fm2) / (T::lit(2.0) * h2);
            d = (T::lit(4.0) * d2 - d) / T::lit(3.0);
        }
        g.push(d);
    }
    Ok(g)
}
