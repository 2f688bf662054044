//! Distributions on finite ordered grids in [0,1].

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, violated, Error, Result};
use crate::scalar::Scalar;

/// Absolute tolerance on cdf comparisons.
pub const CDF_TOL: f64 = 1e-8;
/// Absolute tolerance on integrated quantities (survival and quantile integrals).
pub const INTEGRATED_TOL: f64 = 1e-6;
/// Default number of grid points.
pub const DEFAULT_GRID_SIZE: usize = 201;

/// Strictly increasing points in [0,1] starting at 0 and ending at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<S>", into = "Vec<S>", bound = "S: Scalar")]
pub struct Grid<S: Scalar> {
    points: Vec<S>,
}

impl<S: Scalar> Grid<S> {
    pub fn new(points: Vec<S>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("grid needs at least two points");
        }
        if points[0] != S::zero() || *points.last().unwrap() != S::one() {
            return invalid("grid must start at 0 and end at 1");
        }
        if points.iter().any(|p| !p.is_finite()) {
            return invalid("grid points must be finite");
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("grid points must be strictly increasing");
        }
        Ok(Grid { points })
    }

    /// `m` evenly spaced points, endpoints included.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return invalid("grid needs at least two points");
        }
        let last = S::of_usize(m - 1);
        let mut points: Vec<S> = (0..m).map(|k| S::of_usize(k) / last).collect();
        points[m - 1] = S::one();
        Grid::new(points)
    }

    pub fn points(&self) -> &[S] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of `x` if it is a grid point (to within a few ulps).
    pub fn index_of(&self, x: S) -> Option<usize> {
        let slack = S::epsilon() * S::lit(8.0);
        let k = self.points.partition_point(|p| *p < x - slack);
        (k < self.points.len() && (self.points[k] - x).abs() <= slack).then_some(k)
    }

    /// Number of grid points ≤ x.
    fn count_le(&self, x: S) -> usize {
        self.points.partition_point(|p| *p <= x)
    }
}

impl<S: Scalar> TryFrom<Vec<S>> for Grid<S> {
    type Error = Error;
    fn try_from(points: Vec<S>) -> Result<Self> {
        Grid::new(points)
    }
}

impl<S: Scalar> From<Grid<S>> for Vec<S> {
    fn from(g: Grid<S>) -> Self {
        g.points
    }
}

/// Probability weights on the points of a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution<S>", into = "RawDistribution<S>", bound = "S: Scalar")]
pub struct GridDistribution<S: Scalar> {
    grid: Arc<Grid<S>>,
    weights: Vec<S>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "S: Scalar")]
struct RawDistribution<S: Scalar> {
    grid: Vec<S>,
    weights: Vec<S>,
}

impl<S: Scalar> TryFrom<RawDistribution<S>> for GridDistribution<S> {
    type Error = Error;
    fn try_from(raw: RawDistribution<S>) -> Result<Self> {
        GridDistribution::new(Arc::new(Grid::new(raw.grid)?), raw.weights)
    }
}

impl<S: Scalar> From<GridDistribution<S>> for RawDistribution<S> {
    fn from(d: GridDistribution<S>) -> Self {
        RawDistribution { grid: d.grid.points.clone(), weights: d.weights }
    }
}

impl<S: Scalar> GridDistribution<S> {
    pub fn new(grid: Arc<Grid<S>>, weights: Vec<S>) -> Result<Self> {
        if weights.len() != grid.len() {
            return invalid(format!("{} weights for {} grid points", weights.len(), grid.len()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < S::zero()) {
            return invalid("weights must be finite and nonnegative");
        }
        let total: S = weights.iter().copied().sum();
        if (total - S::one()).abs() > S::tol(1e-12) {
            return invalid(format!("weights sum to {total}, not 1"));
        }
        Ok(GridDistribution { grid, weights })
    }

    /// Clips round-off negatives and rescales to unit mass. For solver output only.
    pub(crate) fn from_raw_weights(grid: Arc<Grid<S>>, mut weights: Vec<S>) -> Result<Self> {
        for w in weights.iter_mut() {
            if *w < S::zero() {
                *w = S::zero();
            }
        }
        let total: S = weights.iter().copied().sum();
        if !(total > S::zero()) || (total - S::one()).abs() > S::tol(1e-6) {
            return Err(Error::NumericalFailure(format!("weights drifted to total mass {total}")));
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
        GridDistribution::new(grid, weights)
    }

    pub fn point_mass(grid: Arc<Grid<S>>, index: usize) -> Result<Self> {
        if index >= grid.len() {
            return invalid("point-mass index outside grid");
        }
        let mut w = vec![S::zero(); grid.len()];
        w[index] = S::one();
        GridDistribution::new(grid, w)
    }

    pub fn uniform(grid: Arc<Grid<S>>) -> Self {
        let m = S::of_usize(grid.len());
        let w = vec![S::one() / m; grid.len()];
        GridDistribution { grid, weights: w }
    }

    /// Builds weights by differencing a cdf sampled at the grid points.
    pub fn from_cdf(grid: Arc<Grid<S>>, cdf: &[S]) -> Result<Self> {
        if cdf.len() != grid.len() {
            return invalid("cdf length differs from grid");
        }
        let mut prev = S::zero();
        let mut w = Vec::with_capacity(cdf.len());
        for (k, &c) in cdf.iter().enumerate() {
            if c < prev - S::tol(1e-12) {
                return invalid(format!("cdf decreases at index {k}"));
            }
            let c = if k + 1 == cdf.len() { S::one() } else { c.min(S::one()).max(prev) };
            w.push(c - prev);
            prev = c;
        }
        GridDistribution::new(grid, w)
    }

    pub fn grid(&self) -> &Arc<Grid<S>> {
        &self.grid
    }

    pub fn points(&self) -> &[S] {
        self.grid.points()
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    /// Running sums of the weights; the final entry is exactly 1.
    pub fn cdf(&self) -> Vec<S> {
        cdf_of(&self.weights)
    }

    pub fn cdf_at(&self, x: S) -> Result<S> {
        if !(x >= S::zero() && x <= S::one()) {
            return invalid(format!("cdf_at argument {x} outside [0,1]"));
        }
        let k = self.grid.count_le(x);
        if k == self.len() {
            return Ok(S::one());
        }
        Ok(self.weights[..k].iter().copied().sum::<S>().min(S::one()))
    }

    /// Generalized inverse inf{x : F(x) ≥ q}; q = 0 gives the smallest support point.
    pub fn quantile(&self, q: S) -> Result<S> {
        if !(q >= S::zero() && q <= S::one()) {
            return invalid(format!("quantile level {q} outside [0,1]"));
        }
        Ok(self.points()[self.quantile_index(q)])
    }

    pub(crate) fn quantile_index(&self, q: S) -> usize {
        if q <= S::zero() {
            return self.weights.iter().position(|w| *w > S::zero()).unwrap_or(0);
        }
        let target = q - S::tol(1e-12);
        let mut acc = S::zero();
        for (k, w) in self.weights.iter().enumerate() {
            acc += *w;
            if acc >= target && *w > S::zero() || acc >= q {
                return k;
            }
        }
        self.len() - 1
    }

    pub fn mean(&self) -> S {
        self.expect(|x| x)
    }

    pub fn expect(&self, f: impl Fn(S) -> S) -> S {
        self.points().iter().zip(&self.weights).map(|(x, w)| f(*x) * *w).sum()
    }

    /// Largest weight strictly inside (0,1).
    pub fn max_interior_atom(&self) -> S {
        let m = self.len();
        self.weights[1..m - 1].iter().copied().fold(S::zero(), S::max)
    }

    /// Grid points carrying more than `eps` mass.
    pub fn support(&self, eps: S) -> Vec<S> {
        self.points().iter().zip(&self.weights).filter(|(_, w)| **w > eps).map(|(x, _)| *x).collect()
    }

    /// (1 − s)·self + s·other.
    pub fn mix(&self, other: &Self, s: S) -> Result<Self> {
        if !self.same_grid(other) {
            return invalid("mixing distributions on different grids");
        }
        let w = self.weights.iter().zip(&other.weights).map(|(a, b)| (S::one() - s) * *a + s * *b).collect();
        GridDistribution::from_raw_weights(self.grid.clone(), w)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(e.to_string()))
    }

    /// Two columns `x,weight` with a header row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["x", "weight"]).map_err(io)?;
        for (x, p) in self.points().iter().zip(&self.weights) {
            w.write_record([format!("{x:e}"), format!("{p:e}")]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let (mut xs, mut ws) = (Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::InvalidInput(e.to_string()))?;
            if rec.len() != 2 {
                return invalid("distribution csv needs exactly two columns");
            }
            let parse = |s: &str| {
                s.trim().parse::<f64>().map(S::lit).map_err(|e| Error::InvalidInput(format!("{s}: {e}")))
            };
            xs.push(parse(&rec[0])?);
            ws.push(parse(&rec[1])?);
        }
        GridDistribution::new(Arc::new(Grid::new(xs)?), ws)
    }
}

pub(crate) fn cdf_of<S: Scalar>(weights: &[S]) -> Vec<S> {
    let mut acc = S::zero();
    let mut out: Vec<S> = weights
        .iter()
        .map(|w| {
            acc += *w;
            acc.min(S::one())
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = S::one();
    }
    out
}

/// Random distribution for property tests and validation: exponential weights on a random
/// subset of points, occasionally a two-point law.
pub fn sample_distribution<S: Scalar, R: Rng>(grid: &Arc<Grid<S>>, rng: &mut R) -> GridDistribution<S> {
    let m = grid.len();
    let mut w = vec![0.0f64; m];
    match rng.gen_range(0..4) {
        0 => {
            let a = rng.gen_range(0..m);
            let b = rng.gen_range(0..m);
            let s: f64 = rng.gen();
            w[a] += s;
            w[b] += 1.0 - s;
        }
        _ => {
            let density: f64 = rng.gen_range(0.05..1.0);
            for wk in w.iter_mut() {
                if rng.gen::<f64>() < density {
                    *wk = -rng.gen::<f64>().max(1e-300).ln();
                }
            }
            if w.iter().all(|x| *x == 0.0) {
                w[rng.gen_range(0..m)] = 1.0;
            }
        }
    }
    let total: f64 = w.iter().sum();
    let weights = w.iter().map(|x| S::lit(x / total)).collect();
    GridDistribution::from_raw_weights(grid.clone(), weights).expect("sampled weights are valid")
}

/// Rank prizes v₁ ≥ … ≥ vₙ = 0 summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<S>", into = "Vec<S>", bound = "S: Scalar")]
pub struct PrizeVector<S: Scalar> {
    v: Vec<S>,
}

impl<S: Scalar> PrizeVector<S> {
    pub fn new(v: Vec<S>) -> Result<Self> {
        let tol = S::tol(1e-12);
        if v.len() < 2 {
            return invalid("prize vector needs at least two ranks");
        }
        if v.iter().any(|x| !x.is_finite()) {
            return invalid("prize vector entries must be finite");
        }
        if let Some(k) = v.windows(2).position(|w| w[1] > w[0] + tol) {
            return invalid(format!("prize vector must be nonincreasing (v{} < v{})", k + 1, k + 2));
        }
        if v.last().unwrap().abs() > tol {
            return invalid("prize vector must end with vn = 0");
        }
        let total: S = v.iter().copied().sum();
        if (total - S::one()).abs() > tol {
            return invalid(format!("prize vector must sum to 1 (sum = {total})"));
        }
        Ok(PrizeVector { v })
    }

    pub fn winner_take_all(n: usize) -> Result<Self> {
        let mut v = vec![S::zero(); n];
        if n > 0 {
            v[0] = S::one();
        }
        PrizeVector::new(v)
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.v
    }

    pub fn top(&self) -> S {
        self.v[0]
    }
}

impl<S: Scalar> TryFrom<Vec<S>> for PrizeVector<S> {
    type Error = Error;
    fn try_from(v: Vec<S>) -> Result<Self> {
        PrizeVector::new(v)
    }
}

impl<S: Scalar> From<PrizeVector<S>> for Vec<S> {
    fn from(p: PrizeVector<S>) -> Self {
        p.v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Dominates,
    DominatedBy,
    Equal,
    Incomparable,
}

/// Outcome of an order comparison. The relation always reads "first argument versus second".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OrderVerdict<S: Scalar> {
    pub relation: Relation,
    pub witness: Option<S>,
    pub max_violation: S,
}

impl<S: Scalar> OrderVerdict<S> {
    /// True for `dominates` and for `equal`.
    pub fn weakly_dominates(&self) -> bool {
        matches!(self.relation, Relation::Dominates | Relation::Equal)
    }

    /// Classifies differences d(x) where "first dominates" means d ≤ tol everywhere.
    fn from_differences(d: &[S], at: &[S], tol: S, extra_incomparable: Option<(S, S)>) -> Self {
        let (mut hi, mut hi_at) = (S::neg_infinity(), 0);
        let (mut lo, mut lo_at) = (S::infinity(), 0);
        for (k, v) in d.iter().enumerate() {
            if *v > hi {
                hi = *v;
                hi_at = k;
            }
            if *v < lo {
                lo = *v;
                lo_at = k;
            }
        }
        if let Some((witness, violation)) = extra_incomparable {
            return OrderVerdict { relation: Relation::Incomparable, witness: Some(witness), max_violation: violation };
        }
        let first = hi <= tol;
        let second = lo >= -tol;
        let zero = S::zero();
        match (first, second) {
            (true, true) => OrderVerdict { relation: Relation::Equal, witness: None, max_violation: hi.max(-lo).max(zero) },
            (true, false) => OrderVerdict { relation: Relation::Dominates, witness: None, max_violation: hi.max(zero) },
            (false, true) => OrderVerdict { relation: Relation::DominatedBy, witness: None, max_violation: (-lo).max(zero) },
            (false, false) => {
                let witness = if hi <= -lo { at[hi_at] } else { at[lo_at] };
                OrderVerdict { relation: Relation::Incomparable, witness: Some(witness), max_violation: hi.min(-lo) }
            }
        }
    }
}

fn require_same_grid<S: Scalar>(f: &GridDistribution<S>, g: &GridDistribution<S>) -> Result<()> {
    if f.same_grid(g) {
        Ok(())
    } else {
        invalid("distributions live on different grids")
    }
}

/// First-order comparison: `dominates` when F's cdf lies below G's everywhere (within tol).
pub fn fosd_compare<S: Scalar>(f: &GridDistribution<S>, g: &GridDistribution<S>, tol: S) -> Result<OrderVerdict<S>> {
    require_same_grid(f, g)?;
    let d: Vec<S> = f.cdf().iter().zip(g.cdf()).map(|(a, b)| *a - b).collect();
    Ok(OrderVerdict::from_differences(&d, f.points(), tol, None))
}

/// Convex order from quantile samples on a shared uniform q-grid. `dominates` when the first
/// law is the more dispersed one: H(p) = ∫₀^p (q_first − q_second) ≤ tol and |H(1)| ≤ tol.
pub fn convex_order_compare<S: Scalar>(q_first: &[S], q_second: &[S], tol: S) -> Result<OrderVerdict<S>> {
    if q_first.len() != q_second.len() {
        return invalid("quantile samples have different lengths");
    }
    if q_first.len() < 2 {
        return invalid("need at least two quantile samples");
    }
    let m = q_first.len();
    let h = S::one() / S::of_usize(m - 1);
    let half = S::lit(0.5);
    let mut acc = S::zero();
    let mut big_h = vec![S::zero(); m];
    let levels: Vec<S> = (0..m).map(|k| S::of_usize(k) * h).collect();
    for k in 1..m {
        let a = q_first[k - 1] - q_second[k - 1];
        let b = q_first[k] - q_second[k];
        acc += half * h * (a + b);
        big_h[k] = acc;
    }
    let end = big_h[m - 1];
    let extra = (end.abs() > tol).then_some((S::one(), end.abs()));
    Ok(OrderVerdict::from_differences(&big_h, &levels, tol, extra))
}

/// ∫ₓ¹ (1 − F(u)) du at each grid point (exact for step cdfs).
pub fn integrated_survival<S: Scalar>(f: &GridDistribution<S>) -> Vec<S> {
    let x = f.points();
    let cdf = f.cdf();
    let m = x.len();
    let mut out = vec![S::zero(); m];
    for k in (0..m - 1).rev() {
        out[k] = out[k + 1] + (S::one() - cdf[k]) * (x[k + 1] - x[k]);
    }
    out
}

/// Increasing convex order: `dominates` when ∫ₓ¹(1−F) ≥ ∫ₓ¹(1−G) − tol for all x.
pub fn icx_compare<S: Scalar>(f: &GridDistribution<S>, g: &GridDistribution<S>, tol: S) -> Result<OrderVerdict<S>> {
    require_same_grid(f, g)?;
    let sf = integrated_survival(f);
    let sg = integrated_survival(g);
    let d: Vec<S> = sg.iter().zip(&sf).map(|(b, a)| *b - *a).collect();
    Ok(OrderVerdict::from_differences(&d, f.points(), tol, None))
}

/// Partial sums of `w` weakly exceed those of `v`, with equal totals.
pub fn majorizes<S: Scalar>(w: &PrizeVector<S>, v: &PrizeVector<S>) -> Result<bool> {
    if w.n() != v.n() {
        return invalid("prize vectors have different lengths");
    }
    let tol = S::tol(1e-12);
    let (mut sw, mut sv) = (S::zero(), S::zero());
    for (a, b) in w.as_slice().iter().zip(v.as_slice()) {
        sw += *a;
        sv += *b;
        if sw < sv - tol {
            return Ok(false);
        }
    }
    Ok((sw - sv).abs() <= tol)
}

/// Moves `delta` of prize from rank `j` to the better rank `i < j` (0-based ranks).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Transfer<S: Scalar> {
    pub i: usize,
    pub j: usize,
    pub delta: S,
}

/// Applies transfers in order to a raw prize sequence.
pub fn apply_transfers<S: Scalar>(v: &[S], path: &[Transfer<S>]) -> Vec<S> {
    let mut u = v.to_vec();
    for t in path {
        u[t.i] += t.delta;
        u[t.j] -= t.delta;
    }
    u
}

/// Sequence of reverse Pigou-Dalton transfers turning `v` into `w`.
pub fn pigou_dalton_path<S: Scalar>(v: &PrizeVector<S>, w: &PrizeVector<S>) -> Result<Vec<Transfer<S>>> {
    if !majorizes(w, v)? {
        return violated("target prize vector does not majorize the source");
    }
    let n = v.n();
    let target = w.as_slice();
    let mut u = v.as_slice().to_vec();
    let eps = S::tol(1e-15);
    let mut path = Vec::new();
    for _ in 0..4 * n * n + 4 {
        let Some(i) = (0..n).find(|&k| target[k] - u[k] > eps) else { break };
        let mut partial = vec![S::zero(); n];
        let mut acc = S::zero();
        for k in 0..n {
            acc += target[k] - u[k];
            partial[k] = acc;
        }
        let m_star = (i..n).find(|&m| partial[m] <= eps).unwrap_or(n - 1);
        let Some(j) = (i + 1..=m_star).rev().find(|&k| u[k] - target[k] > eps) else { break };
        let mut delta = (target[i] - u[i]).min(u[j] - target[j]);
        for d in &partial[i..j] {
            delta = delta.min(*d);
        }
        if delta <= S::zero() {
            break;
        }
        u[i] += delta;
        u[j] -= delta;
        path.push(Transfer { i, j, delta });
    }
    Ok(path)
}

/// Lévy distance between two step cdfs (grids may differ).
pub fn levy_distance<S: Scalar>(f: &GridDistribution<S>, g: &GridDistribution<S>) -> S {
    let step = |d: &GridDistribution<S>| {
        let pts = d.points().to_vec();
        let cdf = d.cdf();
        move |x: S| -> S {
            let k = pts.partition_point(|p| *p <= x);
            if k == 0 {
                S::zero()
            } else {
                cdf[k - 1]
            }
        }
    };
    let (cf, cg) = (step(f), step(g));
    let mut candidates: Vec<S> = f.points().iter().chain(g.points()).copied().collect();
    candidates.push(S::zero());
    let holds = |eps: S| {
        let one_side = |a: &dyn Fn(S) -> S, b: &dyn Fn(S) -> S, bpts: &[S]| {
            candidates.iter().chain(bpts.iter().map(|p| *p - eps).collect::<Vec<_>>().iter()).all(|&x| {
                a(x) <= b(x + eps) + eps + S::tol(1e-14)
            })
        };
        one_side(&cg, &cf, f.points()) && one_side(&cf, &cg, g.points())
    };
    let (mut lo, mut hi) = (S::zero(), S::one());
    if holds(lo) {
        return lo;
    }
    for _ in 0..60 {
        let mid = (lo + hi) / S::lit(2.0);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Lévy distance from a step cdf to a continuous cdf `h`, checked on a dense sample of [0,1].
pub fn levy_distance_to<S: Scalar>(f: &GridDistribution<S>, h: impl Fn(S) -> S, samples: usize) -> S {
    let pts = f.points().to_vec();
    let cdf = f.cdf();
    let cf = |x: S| {
        let k = pts.partition_point(|p| *p <= x);
        if k == 0 {
            S::zero()
        } else {
            cdf[k - 1]
        }
    };
    let ch = |x: S| {
        if x < S::zero() {
            S::zero()
        } else if x > S::one() {
            S::one()
        } else {
            h(x)
        }
    };
    let mut xs: Vec<S> = (0..=samples).map(|k| S::of_usize(k) / S::of_usize(samples)).collect();
    xs.extend_from_slice(&pts);
    let holds = |eps: S| {
        let slack = S::tol(1e-12);
        xs.iter().all(|&x| cf(x) <= ch(x + eps) + eps + slack && ch(x) <= cf(x + eps) + eps + slack)
            && pts.iter().all(|&p| {
                let x = p - eps;
                ch(x) <= cf(p) + eps + slack
            })
    };
    let (mut lo, mut hi) = (S::zero(), S::one());
    if holds(lo) {
        return lo;
    }
    for _ in 0..60 {
        let mid = (lo + hi) / S::lit(2.0);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
