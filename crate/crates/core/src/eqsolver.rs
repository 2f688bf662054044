//! Interim prizes, best responses, KKT certificates and symmetric equilibrium / planner solves.

use std::fmt;
use std::sync::Arc;

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costfun::{evaluate, segment_integral, CostModel};
use crate::error::{invalid, Error, Result};
use crate::funcs::ScalarFn;
use crate::gridmeasure::{cdf_of, sample_distribution, Grid, GridDistribution, PrizeVector};
use crate::scalar::{binom, ipow, Scalar};

pub const DEFAULT_KKT_TOL: f64 = 1e-3;
pub const DEFAULT_SUPPORT_EPS: f64 = 1e-6;

/// Payoffs of player 1 for a realized profile, used by Monte Carlo prize models.
pub trait PayoffOracle<S: Scalar>: Send + Sync {
    /// Expected prize at `own` against `others`, already averaged over tie-breaking.
    fn prize(&self, own: S, others: &[S]) -> S;
    /// Total prize paid out at a realized profile.
    fn aggregate(&self, profile: &[S]) -> S;
    fn prize_bound(&self) -> S;
}

/// Rank-order payoffs as an oracle; lets the Monte Carlo path be checked against the exact formula.
#[derive(Debug, Clone)]
pub struct RankOrderOracle<S: Scalar>(pub PrizeVector<S>);

impl<S: Scalar> PayoffOracle<S> for RankOrderOracle<S> {
    fn prize(&self, own: S, others: &[S]) -> S {
        let above = others.iter().filter(|z| **z > own).count();
        let tied = others.iter().filter(|z| **z == own).count();
        let v = self.0.as_slice();
        let share: S = v[above..=above + tied].iter().copied().sum();
        share / S::of_usize(tied + 1)
    }

    fn aggregate(&self, _profile: &[S]) -> S {
        self.0.as_slice().iter().copied().sum()
    }

    fn prize_bound(&self) -> S {
        self.0.top()
    }
}

#[derive(Clone)]
pub enum PrizeKind<S: Scalar> {
    RankOrder(PrizeVector<S>),
    /// Earliest finishing time wins V(t); x = 0 is t = ∞ with V = 0.
    MinRace(ScalarFn<S>),
    /// Highest index wins V(x).
    MaxQuality(ScalarFn<S>),
    Custom {
        oracle: Arc<dyn PayoffOracle<S>>,
        samples: usize,
        seed: u64,
        /// Largest accepted Monte Carlo standard error.
        max_standard_error: S,
    },
}

impl<S: Scalar> fmt::Debug for PrizeKind<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrizeKind::RankOrder(v) => write!(f, "RankOrder({:?})", v.as_slice()),
            PrizeKind::MinRace(v) => write!(f, "MinRace({v:?})"),
            PrizeKind::MaxQuality(v) => write!(f, "MaxQuality({v:?})"),
            PrizeKind::Custom { samples, seed, .. } => write!(f, "Custom(samples={samples}, seed={seed})"),
        }
    }
}

/// A prize structure for n symmetric players on a grid.
#[derive(Debug, Clone)]
pub struct PrizeSpec<S: Scalar> {
    pub n: usize,
    pub kind: PrizeKind<S>,
    pub grid: Arc<Grid<S>>,
}

/// Anything that produces a deviator's interim prize against symmetric opponents.
pub trait PrizeModel<S: Scalar>: Send + Sync {
    fn players(&self) -> usize;
    fn grid(&self) -> &Arc<Grid<S>>;
    /// Upper bound π̄ on any single player's prize.
    fn prize_bound(&self) -> S;
    fn interim(&self, weights: &[S]) -> Result<Vec<S>>;
    fn aggregate_gradient(&self, _weights: &[S]) -> Result<Vec<S>> {
        invalid("this prize model has no aggregate prize")
    }
}

impl<S: Scalar> PrizeSpec<S> {
    pub fn new(n: usize, kind: PrizeKind<S>, grid: Arc<Grid<S>>) -> Result<Self> {
        let spec = PrizeSpec { n, kind, grid };
        spec.check()?;
        Ok(spec)
    }

    pub fn rank_order(v: PrizeVector<S>, grid: Arc<Grid<S>>) -> Result<Self> {
        PrizeSpec::new(v.n(), PrizeKind::RankOrder(v), grid)
    }

    pub fn check(&self) -> Result<()> {
        if self.n < 2 {
            return invalid("need at least two players");
        }
        match &self.kind {
            PrizeKind::RankOrder(v) if v.n() != self.n => invalid("prize vector length differs from player count"),
            PrizeKind::MinRace(f) | PrizeKind::MaxQuality(f) => f.check(),
            PrizeKind::Custom { samples, oracle, seed, .. } => {
                if *samples < 2 {
                    return invalid("Monte Carlo prize needs at least two samples");
                }
                check_symmetry(oracle.as_ref(), self.n, *seed)
            }
            _ => Ok(()),
        }
    }

    fn winner_values(&self) -> Option<Vec<S>> {
        let pts = self.grid.points();
        match &self.kind {
            PrizeKind::MinRace(v) => Some(
                pts.iter()
                    .map(|x| match crate::costfun::time_of(*x) {
                        None => S::zero(),
                        Some(t) => v.eval(t),
                    })
                    .collect(),
            ),
            PrizeKind::MaxQuality(v) => Some(pts.iter().map(|x| v.eval(*x)).collect()),
            _ => None,
        }
    }

    fn check_len(&self, weights: &[S]) -> Result<()> {
        if weights.len() != self.grid.len() {
            return invalid("distribution is not on the prize spec's grid");
        }
        Ok(())
    }
}

fn check_symmetry<S: Scalar>(oracle: &dyn PayoffOracle<S>, n: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..16 {
        let mut profile: Vec<S> = (0..n).map(|_| S::lit(rng.gen::<f64>())).collect();
        let base = oracle.aggregate(&profile);
        profile.reverse();
        profile.rotate_left(1);
        let moved = oracle.aggregate(&profile);
        if (base - moved).abs() > S::tol(1e-12) * (S::one() + base.abs()) {
            return Err(Error::AssumptionViolated("aggregate prize is not symmetric in the profile".into()));
        }
    }
    Ok(())
}

impl<S: Scalar> PrizeModel<S> for PrizeSpec<S> {
    fn players(&self) -> usize {
        self.n
    }

    fn grid(&self) -> &Arc<Grid<S>> {
        &self.grid
    }

    fn prize_bound(&self) -> S {
        match &self.kind {
            PrizeKind::RankOrder(v) => v.top(),
            PrizeKind::Custom { oracle, .. } => oracle.prize_bound(),
            _ => self.winner_values().unwrap().into_iter().fold(S::zero(), S::max),
        }
    }

    fn interim(&self, weights: &[S]) -> Result<Vec<S>> {
        self.check_len(weights)?;
        match &self.kind {
            PrizeKind::RankOrder(v) => Ok(rank_interim(v, self.n, weights)),
            PrizeKind::Custom { oracle, samples, seed, max_standard_error } => {
                let (mean, se) = monte_carlo(self, oracle.as_ref(), *samples, *seed, weights, false);
                if se > *max_standard_error {
                    return Err(Error::NumericalFailure(format!(
                        "Monte Carlo standard error {se} above {max_standard_error}"
                    )));
                }
                Ok(mean)
            }
            _ => Ok(winner_interim(&self.winner_values().unwrap(), self.n, weights)),
        }
    }

    fn aggregate_gradient(&self, weights: &[S]) -> Result<Vec<S>> {
        self.check_len(weights)?;
        match &self.kind {
            PrizeKind::RankOrder(v) => {
                let total: S = v.as_slice().iter().copied().sum();
                Ok(vec![total; weights.len()])
            }
            PrizeKind::Custom { oracle, samples, seed, max_standard_error } => {
                let (mean, se) = monte_carlo(self, oracle.as_ref(), *samples, *seed, weights, true);
                if se > *max_standard_error {
                    return Err(Error::NumericalFailure(format!(
                        "Monte Carlo standard error {se} above {max_standard_error}"
                    )));
                }
                Ok(mean)
            }
            _ => Ok(winner_aggregate(&self.winner_values().unwrap(), self.n, weights)),
        }
    }
}

/// Exact tie-aware interim prize for rank-order payoffs.
fn rank_interim<S: Scalar>(v: &PrizeVector<S>, n: usize, weights: &[S]) -> Vec<S> {
    let prizes = v.as_slice();
    let mut prefix = vec![S::zero(); n + 1];
    for k in 0..n {
        prefix[k + 1] = prefix[k] + prizes[k];
    }
    let others = n - 1;
    let mut coef = vec![vec![S::zero(); others + 1]; others + 1];
    for (b, row) in coef.iter_mut().enumerate() {
        for (t, c) in row.iter_mut().enumerate().take(others + 1 - b) {
            *c = binom::<S>(others, b) * binom::<S>(others - b, t);
        }
    }
    let cdf = cdf_of(weights);
    let mut out = Vec::with_capacity(weights.len());
    let mut below = S::zero();
    for (k, &w) in weights.iter().enumerate() {
        let above = (S::one() - cdf[k]).max(S::zero());
        let mut acc = S::zero();
        for b in 0..=others {
            let pb = ipow(below, b);
            if pb == S::zero() {
                continue;
            }
            for t in 0..=others - b {
                let a = others - b - t;
                let pt = ipow(w, t);
                if pt == S::zero() {
                    continue;
                }
                let share = (prefix[a + t + 1] - prefix[a]) / S::of_usize(t + 1);
                acc += coef[b][t] * pb * pt * ipow(above, a) * share;
            }
        }
        out.push(acc);
        below = cdf[k];
    }
    out
}

/// Interim prize when the highest index wins `values[k]` and ties split uniformly.
fn winner_interim<S: Scalar>(values: &[S], n: usize, weights: &[S]) -> Vec<S> {
    let others = n - 1;
    let cdf = cdf_of(weights);
    let mut below = S::zero();
    let mut out = Vec::with_capacity(weights.len());
    for (k, &w) in weights.iter().enumerate() {
        let mut acc = S::zero();
        for t in 0..=others {
            acc += binom::<S>(others, t) * ipow(below, others - t) * ipow(w, t) / S::of_usize(t + 1);
        }
        out.push(values[k] * acc);
        below = cdf[k];
    }
    out
}

/// E[values(max(x, M))] with M the maximum of n − 1 iid draws.
fn winner_aggregate<S: Scalar>(values: &[S], n: usize, weights: &[S]) -> Vec<S> {
    let others = n - 1;
    let cdf = cdf_of(weights);
    let m = weights.len();
    let pw: Vec<S> = cdf.iter().map(|c| ipow(*c, others)).collect();
    let mut tail = vec![S::zero(); m + 1];
    for j in (0..m).rev() {
        let prev = if j == 0 { S::zero() } else { pw[j - 1] };
        tail[j] = tail[j + 1] + values[j] * (pw[j] - prev);
    }
    (0..m).map(|k| values[k] * pw[k] + tail[k + 1]).collect()
}

fn monte_carlo<S: Scalar>(
    spec: &PrizeSpec<S>,
    oracle: &dyn PayoffOracle<S>,
    samples: usize,
    seed: u64,
    weights: &[S],
    aggregate: bool,
) -> (Vec<S>, S) {
    let pts = spec.grid.points();
    let cdf = cdf_of(weights);
    let others = spec.n - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<S> = (0..samples * others)
        .map(|_| {
            let u = S::lit(rng.gen::<f64>());
            let k = cdf.partition_point(|c| *c < u).min(pts.len() - 1);
            pts[k]
        })
        .collect();
    let mut means = Vec::with_capacity(pts.len());
    let mut worst_se = S::zero();
    let mut profile = vec![S::zero(); spec.n];
    for &x in pts {
        let (mut sum, mut sq) = (S::zero(), S::zero());
        for row in draws.chunks(others) {
            let val = if aggregate {
                profile[0] = x;
                profile[1..].copy_from_slice(row);
                oracle.aggregate(&profile)
            } else {
                oracle.prize(x, row)
            };
            sum += val;
            sq += val * val;
        }
        let k = S::of_usize(samples);
        let mean = sum / k;
        let var = ((sq / k - mean * mean) * k / (k - S::one())).max(S::zero());
        worst_se = worst_se.max((var / k).sqrt());
        means.push(mean);
    }
    (means, worst_se)
}

/// a_F on the grid.
pub fn interim_prize<S: Scalar>(spec: &dyn PrizeModel<S>, f: &GridDistribution<S>) -> Result<Vec<S>> {
    same_grid(spec, f)?;
    spec.interim(f.weights())
}

/// A_F on the grid.
pub fn planner_gradient<S: Scalar>(spec: &dyn PrizeModel<S>, f: &GridDistribution<S>) -> Result<Vec<S>> {
    same_grid(spec, f)?;
    spec.aggregate_gradient(f.weights())
}

fn same_grid<S: Scalar>(spec: &dyn PrizeModel<S>, f: &GridDistribution<S>) -> Result<()> {
    if f.grid().as_ref() != spec.grid().as_ref() {
        return invalid("distribution is not on the prize spec's grid");
    }
    Ok(())
}

/// Where iteration starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "S: Scalar")]
pub enum Start<S: Scalar> {
    Uniform,
    Weights(Vec<S>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct SolverConfig<S: Scalar> {
    /// Relaxation τ ∈ (0,1] applied to every outer update.
    pub damping: S,
    pub max_iter: usize,
    pub kkt_tol: S,
    /// Extragradient iterations allowed inside a best response.
    pub inner_iterations: usize,
    pub support_eps: S,
    pub seed: u64,
    pub mean_constraint: Option<S>,
    /// Initial extragradient step; adapted during the solve.
    pub step: S,
    pub start: Start<S>,
}

impl<S: Scalar> Default for SolverConfig<S> {
    fn default() -> Self {
        SolverConfig {
            damping: S::one(),
            max_iter: 20_000,
            kkt_tol: S::lit(DEFAULT_KKT_TOL),
            inner_iterations: 2000,
            support_eps: S::lit(DEFAULT_SUPPORT_EPS),
            seed: 0,
            mean_constraint: None,
            step: S::lit(0.1),
            start: Start::Uniform,
        }
    }
}

impl<S: Scalar> SolverConfig<S> {
    pub fn check(&self) -> Result<()> {
        if !(self.damping > S::zero() && self.damping <= S::one()) {
            return invalid("damping must lie in (0, 1]");
        }
        if !(self.kkt_tol > S::zero()) || !(self.support_eps > S::zero()) || !(self.step > S::zero()) {
            return invalid("tolerances and step must be positive");
        }
        if self.max_iter == 0 || self.inner_iterations == 0 {
            return invalid("iteration limits must be positive");
        }
        if let Some(m) = self.mean_constraint {
            if !(m >= S::zero() && m <= S::one()) {
                return invalid("mean constraint must lie in [0, 1]");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Game,
    Planner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct KKTReport<S: Scalar> {
    pub lambda: S,
    pub sup_violation: S,
    pub comp_gap: S,
    pub support: Vec<S>,
    /// max over support points of λ − Φ, i.e. pointwise complementarity; absent under a mean
    /// constraint, where the on-support condition involves the mean multiplier too.
    pub support_slack: Option<S>,
    pub converged: bool,
    pub iterations: usize,
}

impl<S: Scalar> KKTReport<S> {
    pub fn satisfied(&self, tol: S) -> bool {
        self.sup_violation <= tol && self.comp_gap <= tol && self.support_slack.is_none_or(|s| s <= tol)
    }
}

/// Net marginal return Φ: a_F − c_F (game) or A_F − c_F (planner).
pub fn net_return<S: Scalar>(
    spec: &dyn PrizeModel<S>,
    cost: &CostModel<S>,
    weights: &[S],
    mode: Mode,
) -> Result<Vec<S>> {
    let prize = match mode {
        Mode::Game => spec.interim(weights)?,
        Mode::Planner => spec.aggregate_gradient(weights)?,
    };
    let c = cost.kernel(spec.grid().points(), weights);
    Ok(prize.iter().zip(&c).map(|(a, c)| *a - *c).collect())
}

fn report_from<S: Scalar>(points: &[S], weights: &[S], phi: &[S], mean: Option<S>, support_eps: S) -> KKTReport<S> {
    let lambda: S = phi.iter().zip(weights).map(|(p, w)| *p * *w).sum();
    let best = match mean {
        None => phi.iter().copied().fold(S::neg_infinity(), S::max),
        Some(m) => slice_vertex(points, phi, m).1,
    };
    let comp_gap = phi.iter().zip(weights).map(|(p, w)| (lambda - *p) * *w).sum();
    let support = points.iter().zip(weights).filter(|(_, w)| **w > support_eps).map(|(x, _)| *x).collect();
    let support_slack = mean.is_none().then(|| {
        phi.iter().zip(weights).filter(|(_, w)| **w > support_eps).map(|(p, _)| lambda - *p).fold(S::zero(), S::max)
    });
    KKTReport { lambda, sup_violation: best - lambda, comp_gap, support, support_slack, converged: false, iterations: 0 }
}

/// KKT certificate of F in the given mode, with default tolerances.
pub fn kkt_residual<S: Scalar>(
    spec: &dyn PrizeModel<S>,
    f: &GridDistribution<S>,
    cost: &CostModel<S>,
    mode: Mode,
) -> Result<KKTReport<S>> {
    kkt_residual_with(spec, f, cost, mode, &SolverConfig::default())
}

/// KKT certificate using the tolerances and optional mean constraint of `cfg`.
pub fn kkt_residual_with<S: Scalar>(
    spec: &dyn PrizeModel<S>,
    f: &GridDistribution<S>,
    cost: &CostModel<S>,
    mode: Mode,
    cfg: &SolverConfig<S>,
) -> Result<KKTReport<S>> {
    same_grid(spec, f)?;
    let phi = net_return(spec, cost, f.weights(), mode)?;
    let mut r = report_from(f.points(), f.weights(), &phi, cfg.mean_constraint, cfg.support_eps);
    r.converged = r.satisfied(cfg.kkt_tol);
    Ok(r)
}

// ---- feasible sets -------------------------------------------------------------------------

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex<S: Scalar>(y: &[S]) -> Vec<S> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut acc = S::zero();
    let mut theta = S::zero();
    for (k, v) in sorted.iter().enumerate() {
        acc += *v;
        let t = (acc - S::one()) / S::of_usize(k + 1);
        if *v - t > S::zero() {
            theta = t;
        }
    }
    y.iter().map(|v| (*v - theta).max(S::zero())).collect()
}

/// Euclidean projection onto {w ≥ 0, Σw = 1, Σ x·w = m}.
pub(crate) fn project_mean_slice<S: Scalar>(y: &[S], x: &[S], m: S) -> Vec<S> {
    let len = y.len();
    let mut edge = vec![S::zero(); len];
    if m <= x[0] {
        edge[0] = S::one();
        return edge;
    }
    if m >= x[len - 1] {
        edge[len - 1] = S::one();
        return edge;
    }
    let at = |beta: S| {
        let shifted: Vec<S> = y.iter().zip(x).map(|(a, b)| *a - beta * *b).collect();
        project_simplex(&shifted)
    };
    let mean = |w: &[S]| -> S { w.iter().zip(x).map(|(a, b)| *a * *b).sum() };
    let (mut lo, mut hi) = (-S::one(), S::one());
    while mean(&at(lo)) < m {
        lo = lo * S::lit(2.0);
    }
    while mean(&at(hi)) > m {
        hi = hi * S::lit(2.0);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / S::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean(&at(mid)) > m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = at((lo + hi) / S::lit(2.0));
    // exact solve on the active set: w_i = y_i − α − β x_i
    let active: Vec<usize> = (0..len).filter(|&i| w[i] > S::zero()).collect();
    let k = S::of_usize(active.len());
    let (sx, sxx, sy, sxy) = active.iter().fold((S::zero(), S::zero(), S::zero(), S::zero()), |acc, &i| {
        (acc.0 + x[i], acc.1 + x[i] * x[i], acc.2 + y[i], acc.3 + x[i] * y[i])
    });
    let det = k * sxx - sx * sx;
    if det.abs() > S::tol(1e-14) {
        let r1 = sy - S::one();
        let r2 = sxy - m;
        let alpha = (sxx * r1 - sx * r2) / det;
        let beta = (k * r2 - sx * r1) / det;
        let mut exact = vec![S::zero(); len];
        let mut ok = true;
        for &i in &active {
            let v = y[i] - alpha - beta * x[i];
            if v < -S::tol(1e-12) {
                ok = false;
                break;
            }
            exact[i] = v.max(S::zero());
        }
        if ok {
            return fix_mean(exact, x, m);
        }
    }
    fix_mean(w, x, m)
}

/// Removes residual round-off in mass and mean by mixing with a feasible two-point law.
fn fix_mean<S: Scalar>(mut w: Vec<S>, x: &[S], m: S) -> Vec<S> {
    let total: S = w.iter().copied().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    let mean: S = w.iter().zip(x).map(|(a, b)| *a * *b).sum();
    let err = mean - m;
    if err.abs() <= S::tol(1e-15) {
        return w;
    }
    let (i, j, wi, wj) = straddle(x, m);
    let target = if err > S::zero() { x[i] } else { x[j] };
    let t = err / (mean - target);
    for v in w.iter_mut() {
        *v *= S::one() - t;
    }
    let _ = target;
    w[i] += t * wi;
    w[j] += t * wj;
    w
}

/// Two adjacent grid points around m with the weights that give mean m.
fn straddle<S: Scalar>(x: &[S], m: S) -> (usize, usize, S, S) {
    let j = x.partition_point(|p| *p < m).min(x.len() - 1);
    if x[j] == m || j == 0 {
        return (j, j, S::one(), S::zero());
    }
    let i = j - 1;
    let wj = (m - x[i]) / (x[j] - x[i]);
    (i, j, S::one() - wj, wj)
}

/// A vertex of the feasible set: point mass (i == j) or a two-point law.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Vertex<S: Scalar> {
    i: usize,
    j: usize,
    wi: S,
    wj: S,
}

impl<S: Scalar> Vertex<S> {
    fn value(&self, g: &[S]) -> S {
        self.wi * g[self.i] + self.wj * g[self.j]
    }

    fn add_to(&self, w: &mut [S], coef: S) {
        w[self.i] += coef * self.wi;
        w[self.j] += coef * self.wj;
    }
}

/// Vertex maximizing g over the mean-m slice, and its value.
fn slice_vertex<S: Scalar>(x: &[S], g: &[S], m: S) -> (Vertex<S>, S) {
    let mut best = (Vertex { i: 0, j: 0, wi: S::one(), wj: S::zero() }, S::neg_infinity());
    let split = x.partition_point(|p| *p < m);
    for (i, &xi) in x.iter().enumerate() {
        if xi == m {
            if g[i] > best.1 {
                best = (Vertex { i, j: i, wi: S::one(), wj: S::zero() }, g[i]);
            }
        }
    }
    for i in 0..split {
        for j in split..x.len() {
            if x[j] <= m {
                continue;
            }
            let wj = (m - x[i]) / (x[j] - x[i]);
            let v = Vertex { i, j, wi: S::one() - wj, wj };
            let val = v.value(g);
            if val > best.1 {
                best = (v, val);
            }
        }
    }
    if best.1 == S::neg_infinity() {
        let k = if m <= x[0] { 0 } else { x.len() - 1 };
        best = (Vertex { i: k, j: k, wi: S::one(), wj: S::zero() }, g[k]);
    }
    best
}

fn argmax<S: Scalar>(g: &[S]) -> usize {
    let mut k = 0;
    for (i, v) in g.iter().enumerate() {
        if *v > g[k] {
            k = i;
        }
    }
    k
}

fn feasible_vertex<S: Scalar>(x: &[S], g: &[S], mean: Option<S>) -> (Vertex<S>, S) {
    match mean {
        None => {
            let k = argmax(g);
            (Vertex { i: k, j: k, wi: S::one(), wj: S::zero() }, g[k])
        }
        Some(m) => slice_vertex(x, g, m),
    }
}

fn project<S: Scalar>(y: &[S], x: &[S], mean: Option<S>) -> Vec<S> {
    match mean {
        None => project_simplex(y),
        Some(m) => project_mean_slice(y, x, m),
    }
}

// ---- best response -------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BestResponse<S: Scalar> {
    pub distribution: GridDistribution<S>,
    /// Frank–Wolfe gap max_s (a − c_H)·(s − H) at the returned point.
    pub gap: S,
    pub iterations: usize,
}

/// Best reply H to opponents F: the solution of the variational inequality
/// (a_F − c_H)·(G − H) ≤ 0 for all feasible G, certified by a Frank–Wolfe gap ≤ kkt_tol/4.
pub fn best_response<S: Scalar>(
    spec: &dyn PrizeModel<S>,
    f: &GridDistribution<S>,
    cost: &CostModel<S>,
    cfg: &SolverConfig<S>,
) -> Result<BestResponse<S>> {
    cfg.check()?;
    same_grid(spec, f)?;
    let a = spec.interim(f.weights())?;
    best_response_to(spec.grid(), &a, cost, cfg, Some(f.weights()))
}

/// Best reply to a fixed interim prize vector `a`, started from `anchor` (uniform if absent).
///
/// With a linear cost the problem is linear and the answer is a vertex. Other kernels are not
/// gradients of a functional, so the reply is found by extragradient on the variational
/// inequality rather than by a conditional-gradient ascent, which can cycle there.
pub fn best_response_to<S: Scalar>(
    grid: &Arc<Grid<S>>,
    a: &[S],
    cost: &CostModel<S>,
    cfg: &SolverConfig<S>,
    anchor: Option<&[S]>,
) -> Result<BestResponse<S>> {
    let x = grid.points();
    let m = x.len();
    let threshold = cfg.kkt_tol / S::lit(4.0);
    let op = |w: &[S]| -> Result<Vec<S>> {
        let c = cost.kernel(x, w);
        Ok(a.iter().zip(&c).map(|(a, c)| *a - *c).collect())
    };
    if cost.is_linear() {
        let g = op(&vec![S::zero(); m])?;
        let (v, _) = feasible_vertex(x, &g, cfg.mean_constraint);
        let mut w = vec![S::zero(); m];
        v.add_to(&mut w, S::one());
        let distribution = GridDistribution::from_raw_weights(grid.clone(), w)?;
        return Ok(BestResponse { distribution, gap: S::zero(), iterations: 1 });
    }
    let start: Vec<S> = match anchor {
        Some(w) => project(w, x, cfg.mean_constraint),
        None => project(&vec![S::one() / S::of_usize(m); m], x, cfg.mean_constraint),
    };
    let inner = SolverConfig { kkt_tol: threshold, max_iter: cfg.inner_iterations, ..cfg.clone() };
    let (w, report) = extragradient(grid, &op, start, &inner)?;
    if !report.converged {
        return Err(Error::NoConvergence {
            iterations: cfg.inner_iterations,
            detail: format!("best response gap {} above {threshold}", report.sup_violation),
        });
    }
    let distribution = GridDistribution::from_raw_weights(grid.clone(), w)?;
    Ok(BestResponse { distribution, gap: report.sup_violation, iterations: report.iterations })
}

// ---- equilibrium and planner solves --------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Solution<S: Scalar> {
    pub distribution: GridDistribution<S>,
    pub kkt: KKTReport<S>,
    /// Planner objective v(F) = E Π / n − C(F), with C measured from the point mass at 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<S>,
}

impl<S: Scalar> Solution<S> {
    pub fn require_converged(self) -> Result<Self> {
        if self.kkt.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.kkt.iterations,
                detail: format!("sup_violation {} after the iteration limit", self.kkt.sup_violation),
            })
        }
    }
}

fn start_weights<S: Scalar>(grid: &Arc<Grid<S>>, cfg: &SolverConfig<S>) -> Result<Vec<S>> {
    let m = grid.len();
    let w = match &cfg.start {
        Start::Uniform => vec![S::one() / S::of_usize(m); m],
        Start::Weights(w) => {
            GridDistribution::new(grid.clone(), w.clone())?;
            w.clone()
        }
    };
    Ok(project(&w, grid.points(), cfg.mean_constraint))
}

/// Relaxed projected extragradient on the variational inequality Φ(F)·(G − F) ≤ 0.
fn extragradient<S: Scalar>(
    grid: &Arc<Grid<S>>,
    op: &dyn Fn(&[S]) -> Result<Vec<S>>,
    start: Vec<S>,
    cfg: &SolverConfig<S>,
) -> Result<(Vec<S>, KKTReport<S>)> {
    let x = grid.points();
    let mean = cfg.mean_constraint;
    let theta = S::lit(0.9);
    let tau = cfg.damping;
    let eta_max = S::lit(10.0) * cfg.step;
    let mut eta = cfg.step;
    let mut w = start;
    let mut phi = op(&w)?;
    let norm = |a: &[S], b: &[S]| a.iter().zip(b).map(|(p, q)| (*p - *q) * (*p - *q)).sum::<S>().sqrt();
    let step_to = |base: &[S], dir: &[S], eta: S| {
        let y: Vec<S> = base.iter().zip(dir).map(|(b, d)| *b + eta * *d).collect();
        project(&y, x, mean)
    };
    for it in 0..cfg.max_iter {
        let mut report = report_from(x, &w, &phi, mean, cfg.support_eps);
        report.iterations = it;
        if report.satisfied(cfg.kkt_tol) {
            report.converged = true;
            return Ok((w, report));
        }
        let (y, phi_y, ratio) = loop {
            let y = step_to(&w, &phi, eta);
            let phi_y = op(&y)?;
            let dist = norm(&y, &w);
            let spread = eta * norm(&phi_y, &phi);
            if dist == S::zero() || spread <= theta * dist {
                let ratio = if dist == S::zero() { S::zero() } else { spread / dist };
                break (y, phi_y, ratio);
            }
            eta *= S::lit(0.5);
            if eta < S::tol(1e-14) {
                return Err(Error::NumericalFailure("extragradient step collapsed".into()));
            }
        };
        let _ = y;
        let z = step_to(&w, &phi_y, eta);
        for (wk, zk) in w.iter_mut().zip(&z) {
            *wk = (S::one() - tau) * *wk + tau * *zk;
        }
        phi = op(&w)?;
        if ratio < S::lit(0.5) * theta {
            eta = (eta * S::lit(1.2)).min(eta_max);
        }
        if it % 1000 == 0 {
            debug!("iteration {it}: sup_violation {} step {eta}", report.sup_violation);
        }
    }
    let mut report = report_from(x, &w, &phi, mean, cfg.support_eps);
    report.iterations = cfg.max_iter;
    report.converged = report.satisfied(cfg.kkt_tol);
    Ok((w, report))
}

/// Symmetric equilibrium: a KKT point of Φ = a_F − c_F. Non-convergence is reported in the
/// certificate (`converged = false`); use [`Solution::require_converged`] to turn it into an error.
pub fn solve_symmetric_equilibrium<S: Scalar>(
    spec: &dyn PrizeModel<S>,
    cost: &CostModel<S>,
    cfg: &SolverConfig<S>,
) -> Result<Solution<S>> {
    cfg.check()?;
    cost.check()?;
    let grid = spec.grid().clone();
    let start = start_weights(&grid, cfg)?;
    let op = |w: &[S]| net_return(spec, cost, w, Mode::Game);
    let (w, kkt) = extragradient(&grid, &op, start, cfg)?;
    let distribution = GridDistribution::from_raw_weights(grid, w)?;
    Ok(Solution { distribution, kkt, objective: None })
}

/// Planner objective v(F) = (1/n)·Σ A_F dF − C(F), C taken from the point mass at 0.
pub fn planner_objective<S: Scalar>(
    spec: &dyn PrizeModel<S>,
    cost: &CostModel<S>,
    f: &GridDistribution<S>,
) -> Result<S> {
    let big_a = spec.aggregate_gradient(f.weights())?;
    let benefit: S = big_a.iter().zip(f.weights()).map(|(a, w)| *a * *w).sum::<S>() / S::of_usize(spec.players());
    let delta0 = GridDistribution::point_mass(f.grid().clone(), 0)?;
    Ok(benefit - evaluate(cost, f, &delta0)?)
}

/// Stationary point of the planner objective with multistart; returns the best candidate.
pub fn solve_planner<S: Scalar>(
    spec: &dyn PrizeModel<S>,
    cost: &CostModel<S>,
    cfg: &SolverConfig<S>,
    restarts: usize,
) -> Result<Solution<S>> {
    cfg.check()?;
    cost.check()?;
    if restarts == 0 {
        return invalid("planner needs at least one start");
    }
    let grid = spec.grid().clone();
    let op = |w: &[S]| net_return(spec, cost, w, Mode::Planner);
    let mut best: Option<Solution<S>> = None;
    for r in 0..restarts {
        let start = if r == 0 {
            start_weights(&grid, cfg)?
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
            let f = sample_distribution(&grid, &mut rng);
            project(f.weights(), grid.points(), cfg.mean_constraint)
        };
        let (w, kkt) = extragradient(&grid, &op, start, cfg)?;
        let distribution = GridDistribution::from_raw_weights(grid.clone(), w)?;
        let objective = planner_objective(spec, cost, &distribution)?;
        debug!("planner start {r}: objective {objective}, converged {}", kkt.converged);
        let better = match &best {
            None => true,
            Some(b) => (kkt.converged && !b.kkt.converged) || (kkt.converged == b.kkt.converged && objective > b.objective.unwrap()),
        };
        if better {
            best = Some(Solution { distribution, kkt, objective: Some(objective) });
        }
    }
    Ok(best.unwrap())
}

/// Payoff change from moving `alpha` of mass at x = 1 to x = 0 against symmetric opponents F.
pub fn atom_shift_gain<S: Scalar>(
    spec: &dyn PrizeModel<S>,
    f: &GridDistribution<S>,
    cost: &CostModel<S>,
    alpha: S,
) -> Result<S> {
    same_grid(spec, f)?;
    let m = f.len();
    let top = f.weights()[m - 1];
    if alpha < S::zero() || alpha > top + S::tol(1e-12) {
        return invalid(format!("atom at 1 is {top}, smaller than the shift {alpha}"));
    }
    if alpha == S::zero() {
        return Ok(S::zero());
    }
    let a = spec.interim(f.weights())?;
    let mut moved = f.weights().to_vec();
    moved[m - 1] = (moved[m - 1] - alpha).max(S::zero());
    moved[0] += alpha;
    let saving = segment_integral(cost, f.points(), f.weights(), &moved)?;
    Ok(alpha * (a[0] - a[m - 1]) - saving)
}
