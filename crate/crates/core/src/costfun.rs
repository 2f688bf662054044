//! Convex distributional costs given by their derivative kernels c_F(x).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::funcs::{BivariateFn, ScalarFn};
use crate::gridmeasure::{cdf_of, sample_distribution, Grid, GridDistribution};
use crate::scalar::Scalar;

pub const DEFAULT_QUADRATURE_STEPS: usize = 64;
/// Largest tolerated Richardson error estimate in `evaluate`.
pub const QUADRATURE_TOL: f64 = 1e-6;

/// Time coordinate t(x) = (1 − x)/x; `None` stands for t = ∞ at x = 0.
pub fn time_of<S: Scalar>(x: S) -> Option<S> {
    (x > S::zero()).then(|| (S::one() - x) / x)
}

/// x(t) = 1/(1 + t).
pub fn x_of_time<S: Scalar>(t: S) -> S {
    S::one() / (S::one() + t)
}

#[derive(Debug, Clone)]
pub enum CostKind<S: Scalar> {
    /// c_F(x) = c(x)
    Linear { c: ScalarFn<S> },
    /// c_F(x) = γ(x) + β(F(x))
    Separable { gamma: ScalarFn<S>, beta: ScalarFn<S> },
    /// c_F(x) = κ(x, F(x))
    Local { kappa: BivariateFn<S> },
    /// c_F(x) = κ(t(x), H(t(x))) with H the law in time coordinates; c_F(0) = c_inf
    TailLocal { kappa: BivariateFn<S>, c_inf: S },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields, bound = "S: Scalar")]
enum RawCostModel<S: Scalar> {
    Linear {
        c: ScalarFn<S>,
        #[serde(default = "default_steps")]
        quadrature_steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steepness: Option<S>,
    },
    Separable {
        gamma: ScalarFn<S>,
        beta: ScalarFn<S>,
        #[serde(default = "default_steps")]
        quadrature_steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steepness: Option<S>,
    },
    Local {
        kappa: BivariateFn<S>,
        #[serde(default = "default_steps")]
        quadrature_steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steepness: Option<S>,
    },
    TailLocal {
        kappa: BivariateFn<S>,
        c_inf: S,
        #[serde(default = "default_steps")]
        quadrature_steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steepness: Option<S>,
    },
}

fn default_steps() -> usize {
    DEFAULT_QUADRATURE_STEPS
}

/// Cost functional with its kernel, plus an optional declared steepness
/// (c_F(y) − c_F(x) ≥ κ·(y − x)) used by the market limit checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawCostModel<S>", into = "RawCostModel<S>", bound = "S: Scalar")]
pub struct CostModel<S: Scalar> {
    pub kind: CostKind<S>,
    pub quadrature_steps: usize,
    pub steepness: Option<S>,
}

impl<S: Scalar> TryFrom<RawCostModel<S>> for CostModel<S> {
    type Error = Error;
    fn try_from(raw: RawCostModel<S>) -> Result<Self> {
        let (kind, quadrature_steps, steepness) = match raw {
            RawCostModel::Linear { c, quadrature_steps, steepness } => (CostKind::Linear { c }, quadrature_steps, steepness),
            RawCostModel::Separable { gamma, beta, quadrature_steps, steepness } => {
                (CostKind::Separable { gamma, beta }, quadrature_steps, steepness)
            }
            RawCostModel::Local { kappa, quadrature_steps, steepness } => (CostKind::Local { kappa }, quadrature_steps, steepness),
            RawCostModel::TailLocal { kappa, c_inf, quadrature_steps, steepness } => {
                (CostKind::TailLocal { kappa, c_inf }, quadrature_steps, steepness)
            }
        };
        let m = CostModel { kind, quadrature_steps, steepness };
        m.check()?;
        Ok(m)
    }
}

impl<S: Scalar> From<CostModel<S>> for RawCostModel<S> {
    fn from(m: CostModel<S>) -> Self {
        let (quadrature_steps, steepness) = (m.quadrature_steps, m.steepness);
        match m.kind {
            CostKind::Linear { c } => RawCostModel::Linear { c, quadrature_steps, steepness },
            CostKind::Separable { gamma, beta } => RawCostModel::Separable { gamma, beta, quadrature_steps, steepness },
            CostKind::Local { kappa } => RawCostModel::Local { kappa, quadrature_steps, steepness },
            CostKind::TailLocal { kappa, c_inf } => RawCostModel::TailLocal { kappa, c_inf, quadrature_steps, steepness },
        }
    }
}

impl<S: Scalar> CostModel<S> {
    pub fn new(kind: CostKind<S>) -> Self {
        CostModel { kind, quadrature_steps: DEFAULT_QUADRATURE_STEPS, steepness: None }
    }

    pub fn linear(c: ScalarFn<S>) -> Self {
        Self::new(CostKind::Linear { c })
    }

    pub fn separable(gamma: ScalarFn<S>, beta: ScalarFn<S>) -> Self {
        Self::new(CostKind::Separable { gamma, beta })
    }

    pub fn local(kappa: BivariateFn<S>) -> Self {
        Self::new(CostKind::Local { kappa })
    }

    pub fn tail_local(kappa: BivariateFn<S>, c_inf: S) -> Self {
        Self::new(CostKind::TailLocal { kappa, c_inf })
    }

    pub fn with_steepness(mut self, k: S) -> Self {
        self.steepness = Some(k);
        self
    }

    /// Parameter sanity (not the economic assumptions; see [`validate`]).
    pub fn check(&self) -> Result<()> {
        if self.quadrature_steps < 2 {
            return invalid("quadrature_steps must be at least 2");
        }
        if let Some(k) = self.steepness {
            if !(k > S::zero()) {
                return invalid("steepness must be positive");
            }
        }
        match &self.kind {
            CostKind::Linear { c } => c.check(),
            CostKind::Separable { gamma, beta } => gamma.check().and(beta.check()),
            CostKind::Local { kappa } => kappa.check(),
            CostKind::TailLocal { kappa, c_inf } => {
                if !c_inf.is_finite() {
                    return invalid("c_inf must be finite");
                }
                kappa.check()
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, CostKind::Linear { .. })
    }

    /// Kernel c_F at every grid point, from raw weights on `points`.
    pub fn kernel(&self, points: &[S], weights: &[S]) -> Vec<S> {
        match &self.kind {
            CostKind::Linear { c } => points.iter().map(|x| c.eval(*x)).collect(),
            CostKind::Separable { gamma, beta } => {
                let cdf = cdf_of(weights);
                points.iter().zip(&cdf).map(|(x, f)| gamma.eval(*x) + beta.eval(*f)).collect()
            }
            CostKind::Local { kappa } => {
                let cdf = cdf_of(weights);
                points.iter().zip(&cdf).map(|(x, f)| kappa.eval(*x, *f)).collect()
            }
            CostKind::TailLocal { kappa, c_inf } => {
                let mut below = S::zero();
                let mut out = Vec::with_capacity(points.len());
                for (x, w) in points.iter().zip(weights) {
                    out.push(match time_of(*x) {
                        None => *c_inf,
                        Some(t) => kappa.eval(t, (S::one() - below).max(S::zero())),
                    });
                    below += *w;
                }
                out
            }
        }
    }

    pub fn kernel_of(&self, f: &GridDistribution<S>) -> Vec<S> {
        self.kernel(f.points(), f.weights())
    }
}

/// c_F(x) at a grid point.
pub fn marginal<S: Scalar>(model: &CostModel<S>, f: &GridDistribution<S>, x: S) -> Result<S> {
    let Some(k) = f.grid().index_of(x) else {
        return invalid(format!("{x} is not a grid point"));
    };
    Ok(model.kernel_of(f)[k])
}

/// C(F) − C(F0) as the line integral of the kernel along the segment from F0 to F.
pub fn evaluate<S: Scalar>(model: &CostModel<S>, f: &GridDistribution<S>, f0: &GridDistribution<S>) -> Result<S> {
    if !f.same_grid(f0) {
        return invalid("cost evaluation on mismatched grids");
    }
    segment_integral(model, f.points(), f0.weights(), f.weights())
}

/// ∫₀¹ Σ c_{F_s}·(dF − dF0) ds on raw weights.
pub(crate) fn segment_integral<S: Scalar>(model: &CostModel<S>, points: &[S], w0: &[S], w1: &[S]) -> Result<S> {
    let diff: Vec<S> = w1.iter().zip(w0).map(|(a, b)| *a - *b).collect();
    if model.is_linear() {
        let c = model.kernel(points, w1);
        return Ok(c.iter().zip(&diff).map(|(c, d)| *c * *d).sum());
    }
    let n = model.quadrature_steps.max(2);
    let n = n + n % 2;
    let fine = 2 * n;
    let mut buf = vec![S::zero(); w0.len()];
    let mut g = Vec::with_capacity(fine + 1);
    for j in 0..=fine {
        let s = S::of_usize(j) / S::of_usize(fine);
        for ((b, a0), a1) in buf.iter_mut().zip(w0).zip(w1) {
            *b = (S::one() - s) * *a0 + s * *a1;
        }
        let c = model.kernel(points, &buf);
        g.push(c.iter().zip(&diff).map(|(c, d)| *c * *d).sum::<S>());
    }
    let simpson = |vals: &[S], stride: usize| {
        let h = S::of_usize(stride) / S::of_usize(fine);
        let m = fine / stride;
        let mut acc = vals[0] + vals[fine];
        for i in 1..m {
            let wgt = if i % 2 == 1 { S::lit(4.0) } else { S::lit(2.0) };
            acc += wgt * vals[i * stride];
        }
        acc * h / S::lit(3.0)
    };
    let coarse = simpson(&g, 2);
    let refined = simpson(&g, 1);
    let err = (refined - coarse).abs() / S::lit(15.0);
    let scale = S::one().max(refined.abs());
    if err > S::tol(QUADRATURE_TOL) * scale {
        return Err(Error::NumericalFailure(format!("segment quadrature error estimate {err} above tolerance")));
    }
    Ok(refined)
}

/// Σ c_F·d(G − F).
pub fn directional<S: Scalar>(model: &CostModel<S>, f: &GridDistribution<S>, g: &GridDistribution<S>) -> S {
    let c = model.kernel_of(f);
    c.iter().zip(g.weights().iter().zip(f.weights())).map(|(c, (a, b))| *c * (*a - *b)).sum()
}

/// Which distribution anchors the cost values in a finite-difference check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceReference {
    /// C(F + εD) − C(F) integrated along the segment from F.
    BasePoint,
    /// Both values integrated from the point mass at 0.
    PointMassAtZero,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct GateauxCheck<S: Scalar> {
    pub eps: Vec<S>,
    pub errors: Vec<S>,
    /// Least-squares slope of log error against log ε.
    pub slope: S,
    /// Errors are at round-off level, so the slope carries no information.
    pub exact: bool,
}

impl<S: Scalar> GateauxCheck<S> {
    pub fn passed(&self) -> bool {
        self.exact || self.slope >= S::lit(0.9)
    }
}

/// Finite-difference check of δC(F; G − F) = Σ c_F·d(G − F).
pub fn gateaux_check<S: Scalar>(
    model: &CostModel<S>,
    f: &GridDistribution<S>,
    g: &GridDistribution<S>,
    eps: &[S],
    reference: DifferenceReference,
) -> Result<GateauxCheck<S>> {
    if !f.same_grid(g) {
        return invalid("gateaux check on mismatched grids");
    }
    let exact_dir = directional(model, f, g);
    let delta0 = GridDistribution::point_mass(f.grid().clone(), 0)?;
    let mut errors = Vec::with_capacity(eps.len());
    for &e in eps {
        let moved = f.mix(g, e)?;
        let diff = match reference {
            DifferenceReference::BasePoint => evaluate(model, &moved, f)?,
            DifferenceReference::PointMassAtZero => evaluate(model, &moved, &delta0)? - evaluate(model, f, &delta0)?,
        };
        errors.push((diff / e - exact_dir).abs());
    }
    let floor = S::tol(1e-9);
    let exact = errors.iter().all(|x| *x <= floor);
    let slope = loglog_slope(eps, &errors);
    Ok(GateauxCheck { eps: eps.to_vec(), errors, slope, exact })
}

pub(crate) fn loglog_slope<S: Scalar>(xs: &[S], ys: &[S]) -> S {
    let tiny = S::min_positive_value();
    let lx: Vec<S> = xs.iter().map(|x| x.max(tiny).ln()).collect();
    let ly: Vec<S> = ys.iter().map(|y| y.max(tiny).ln()).collect();
    let n = S::of_usize(lx.len());
    let mx = lx.iter().copied().sum::<S>() / n;
    let my = ly.iter().copied().sum::<S>() / n;
    let mut num = S::zero();
    let mut den = S::zero();
    for (a, b) in lx.iter().zip(&ly) {
        num += (*a - mx) * (*b - my);
        den += (*a - mx) * (*a - mx);
    }
    if den == S::zero() {
        S::zero()
    } else {
        num / den
    }
}

/// C(F_{1/2}) − C(F) ≤ (C(G) − C(F))/2 along the segment from F to G; returns the excess.
pub fn midpoint_convexity_excess<S: Scalar>(
    model: &CostModel<S>,
    f: &GridDistribution<S>,
    g: &GridDistribution<S>,
) -> Result<S> {
    let mid = f.mix(g, S::lit(0.5))?;
    Ok(evaluate(model, &mid, f)? - evaluate(model, g, f)? / S::lit(2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Kernel shape requirements of the cost family.
    Shape,
    /// c_F(1) ≥ c_F(0) + π̄ + η₁.
    TopCost,
    Convexity,
    Differentiability,
    /// Tail limit c_∞ of time-local kernels.
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub assumption: Assumption,
    pub detail: String,
}

/// Values recorded for the sample with the smallest top-cost margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CostReport<S: Scalar> {
    pub value: S,
    pub kernel_samples: Vec<S>,
    pub c3_margin: S,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CostValidation<S: Scalar> {
    pub report: CostReport<S>,
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub trials: usize,
}

impl<S: Scalar> CostValidation<S> {
    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Sampled checks of the cost assumptions against the prize bound `pi_bar`.
pub fn validate<S: Scalar>(
    model: &CostModel<S>,
    pi_bar: S,
    eta1: S,
    trial_count: usize,
    seed: u64,
    grid: &Arc<Grid<S>>,
) -> Result<CostValidation<S>> {
    if trial_count == 0 {
        return invalid("validation needs at least one trial");
    }
    model.check()?;
    let mut violations = Vec::new();
    shape_checks(model, &mut violations);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grid.len();
    let mut samples = vec![
        GridDistribution::point_mass(grid.clone(), 0)?,
        GridDistribution::point_mass(grid.clone(), m - 1)?,
        two_point(grid, 0, m - 1, S::lit(0.5))?,
        GridDistribution::uniform(grid.clone()),
    ];
    for _ in 0..trial_count {
        samples.push(sample_distribution(grid, &mut rng));
    }
    let delta0 = GridDistribution::point_mass(grid.clone(), 0)?;

    let mut worst: Option<CostReport<S>> = None;
    let mut margin_fail = None;
    for f in &samples {
        let c = model.kernel_of(f);
        let margin = c[m - 1] - c[0] - pi_bar;
        if margin < eta1 && margin_fail.is_none() {
            margin_fail = Some(margin);
        }
        if worst.as_ref().is_none_or(|w| margin < w.c3_margin) {
            let value = evaluate(model, f, &delta0)?;
            worst = Some(CostReport { value, kernel_samples: c, c3_margin: margin });
        }
    }
    if let Some(margin) = margin_fail {
        violations.push(Violation {
            assumption: Assumption::TopCost,
            detail: format!("c_F(1) − c_F(0) − π̄ = {margin} < η₁ = {eta1}"),
        });
    }

    let eps = [S::lit(1e-2), S::lit(1e-3), S::lit(1e-4)];
    let (mut convex_fail, mut diff_fail) = (None, None);
    for pair in samples.windows(2) {
        let (f, g) = (&pair[0], &pair[1]);
        let excess = midpoint_convexity_excess(model, f, g)?;
        if excess > S::tol(1e-8) && convex_fail.is_none() {
            convex_fail = Some(excess);
        }
        let check = gateaux_check(model, f, g, &eps, DifferenceReference::BasePoint)?;
        if !check.passed() && diff_fail.is_none() {
            diff_fail = Some(check.slope);
        }
    }
    if let Some(excess) = convex_fail {
        violations.push(Violation {
            assumption: Assumption::Convexity,
            detail: format!("midpoint convexity exceeded by {excess}"),
        });
    }
    if let Some(slope) = diff_fail {
        violations.push(Violation {
            assumption: Assumption::Differentiability,
            detail: format!("finite-difference error slope {slope} below 0.9"),
        });
    }
    Ok(CostValidation { report: worst.expect("samples are nonempty"), passed: violations.is_empty(), violations, trials: trial_count })
}

fn two_point<S: Scalar>(grid: &Arc<Grid<S>>, a: usize, b: usize, wb: S) -> Result<GridDistribution<S>> {
    let mut w = vec![S::zero(); grid.len()];
    w[a] += S::one() - wb;
    w[b] += wb;
    GridDistribution::new(grid.clone(), w)
}

fn shape_checks<S: Scalar>(model: &CostModel<S>, out: &mut Vec<Violation>) {
    let samples = 1000;
    let xs: Vec<S> = (0..=samples).map(|k| S::of_usize(k) / S::of_usize(samples)).collect();
    let coarse: Vec<S> = (0..=40).map(|k| S::of_usize(k) / S::lit(40.0)).collect();
    let tol = S::tol(1e-9);
    let mut fail = |msg: String| out.push(Violation { assumption: Assumption::Shape, detail: msg });
    match &model.kind {
        CostKind::Linear { c } => {
            let jump = |h: S| {
                (0..=samples)
                    .map(|k| {
                        let x = S::of_usize(k) / S::of_usize(samples) * (S::one() - h);
                        (c.eval(x + h) - c.eval(x)).abs()
                    })
                    .fold(S::zero(), S::max)
            };
            let (wide, narrow) = (jump(S::lit(1e-3)), jump(S::lit(1e-4)));
            if narrow > S::lit(0.5) * wide + tol {
                fail(format!("c looks discontinuous: increments {wide} at 1e-3 and {narrow} at 1e-4"));
            }
        }
        CostKind::Separable { gamma, beta } => {
            if gamma.eval(S::zero()).abs() > tol {
                fail("γ(0) must be 0".into());
            }
            let g: Vec<S> = xs.iter().map(|x| gamma.eval(*x)).collect();
            if g.windows(2).any(|w| w[1] <= w[0]) {
                fail("γ must be strictly increasing".into());
            }
            if g.windows(3).any(|w| w[2] - S::lit(2.0) * w[1] + w[0] > tol) {
                fail("γ must be concave".into());
            }
            if beta.eval(S::zero()).abs() > tol {
                fail("β(0) must be 0".into());
            }
            if xs.windows(2).any(|w| beta.eval(w[1]) < beta.eval(w[0]) - tol) {
                fail("β must be nondecreasing".into());
            }
        }
        CostKind::Local { kappa } => {
            for &x in &coarse {
                if coarse.windows(2).any(|q| kappa.eval(x, q[1]) < kappa.eval(x, q[0]) - tol) {
                    fail(format!("κ(x, ·) must be nondecreasing in q (x = {x})"));
                    break;
                }
            }
            for &q in &coarse {
                if coarse.windows(2).any(|x| kappa.eval(x[1], q) <= kappa.eval(x[0], q)) {
                    fail(format!("κ(·, q) must be strictly increasing in x (q = {q})"));
                    break;
                }
            }
        }
        CostKind::TailLocal { kappa, c_inf } => {
            let times: Vec<S> = (0..=200).map(|k| S::of_usize(k) / S::lit(10.0)).collect();
            for &t in &times {
                if coarse.iter().any(|q| kappa.eval(t, *q) <= *c_inf) {
                    fail(format!("κ(t, q) must exceed c_inf at finite t (t = {t})"));
                    break;
                }
                if coarse.windows(2).any(|q| kappa.eval(t, q[1]) < kappa.eval(t, q[0]) - tol) {
                    fail(format!("κ(t, ·) must be nondecreasing in q (t = {t})"));
                    break;
                }
            }
            let tail = |horizon: S| {
                (0..=100)
                    .flat_map(|i| {
                        let t = horizon * (S::one() + S::of_usize(i) / S::lit(10.0));
                        coarse.iter().map(move |q| (t, *q))
                    })
                    .map(|(t, q)| (kappa.eval(t, q) - *c_inf).abs())
                    .fold(S::zero(), S::max)
            };
            let sups: Vec<S> = [10.0, 20.0, 40.0].iter().map(|h| tail(S::lit(*h))).collect();
            if sups.windows(2).any(|w| w[1] > w[0] + tol) || sups[2] > S::tol(1e-6) {
                out.push(Violation {
                    assumption: Assumption::Tail,
                    detail: format!("κ does not settle at c_inf: sup deviations {sups:?} at t ≥ 10, 20, 40"),
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> Arc<Grid<f64>> {
        Arc::new(Grid::uniform(m).unwrap())
    }

    fn race_kernel() -> CostModel<f64> {
        let kappa = BivariateFn::Product {
            x: ScalarFn::ExpDecay { a: 1.0, rate: 2.0 },
            q: ScalarFn::Affine { a: 1.2, b: 0.3 },
            offset: 0.05,
        };
        CostModel::tail_local(kappa, 0.05)
    }

    #[test]
    fn marginal_examples() {
        let g = grid(101);
        let u = GridDistribution::uniform(g.clone());
        let lin = CostModel::linear(ScalarFn::linear(2.0));
        assert_eq!(marginal(&lin, &u, 0.25).unwrap(), 0.5);
        let sep = CostModel::separable(ScalarFn::linear(2.0), ScalarFn::linear(1.0));
        assert!((marginal(&sep, &u, 0.5).unwrap() - (1.0 + 51.0 / 101.0)).abs() < 1e-12);
        let loc = CostModel::local(BivariateFn::Sum { x: ScalarFn::linear(1.0), q: ScalarFn::constant(0.0) });
        assert!((marginal(&loc, &u, 0.37).unwrap() - 0.37).abs() < 1e-15);
        assert!(marginal(&lin, &u, 0.255).is_err());
    }

    #[test]
    fn tail_kernel_uses_time_coordinates() {
        let g = grid(5);
        let f = GridDistribution::point_mass(g.clone(), 2).unwrap();
        let c = race_kernel().kernel_of(&f);
        assert_eq!(c[0], 0.05);
        // x = 0.25 ↔ t = 3, no mass finished by then: H = 1 − F(x⁻) = 1
        assert!((c[1] - (0.05 + 1.5 * (-6.0f64).exp())).abs() < 1e-15);
        // x = 0.5 ↔ t = 1, the atom at t = 1 counts as finished
        assert!((c[2] - (0.05 + 1.5 * (-2.0f64).exp())).abs() < 1e-15);
        // x = 1 ↔ t = 0: nothing finished yet
        assert!((c[4] - (0.05 + 1.2)).abs() < 1e-15);
    }

    #[test]
    fn evaluate_examples() {
        let g = grid(51);
        let lin = CostModel::linear(ScalarFn::linear(2.0));
        let d0 = GridDistribution::point_mass(g.clone(), 0).unwrap();
        let at = GridDistribution::point_mass(g.clone(), 20).unwrap();
        assert!((evaluate(&lin, &at, &d0).unwrap() - 0.8).abs() < 1e-15);
        let sep = CostModel::separable(ScalarFn::linear(2.0), ScalarFn::linear(1.0));
        assert_eq!(evaluate(&sep, &d0, &d0).unwrap(), 0.0);
        let top = GridDistribution::point_mass(g.clone(), 50).unwrap();
        let v = evaluate(&sep, &top, &d0).unwrap();
        let mut fine = sep.clone();
        fine.quadrature_steps = 128;
        assert!((v - evaluate(&fine, &top, &d0).unwrap()).abs() < 1e-8);
        // closed form for β = id: C(F) = Eγ + (1 + Σw²)/4 − w₀/2, relative to δ₀
        let closed = |f: &GridDistribution<f64>| {
            let sq: f64 = f.weights().iter().map(|w| w * w).sum();
            f.expect(|x| 2.0 * x) + 0.25 * (1.0 + sq) - 0.5 * f.weights()[0]
        };
        assert!((v - (closed(&top) - closed(&d0))).abs() < 1e-12);
    }

    #[test]
    fn validate_examples() {
        let g = grid(41);
        let lin = CostModel::linear(ScalarFn::linear(2.0));
        let r = validate(&lin, 1.0, 0.5, 10, 1, &g).unwrap();
        assert!(r.passed, "{:?}", r.violations);
        assert!((r.report.c3_margin - 1.0).abs() < 1e-12);

        let weak = CostModel::separable(ScalarFn::linear(1.0), ScalarFn::constant(0.0));
        let r = validate(&weak, 1.0, 0.1, 10, 1, &g).unwrap();
        assert!(!r.passed);
        assert_eq!(r.first_violation().unwrap().assumption, Assumption::TopCost);
        assert!(matches!(validate(&lin, 1.0, 0.5, 0, 1, &g), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn validate_flags_shape_failures() {
        let g = grid(21);
        let bad = CostModel::separable(ScalarFn::Power { a: 2.0, p: 2.0 }, ScalarFn::constant(0.0));
        let r = validate(&bad, 0.5, 0.1, 4, 1, &g).unwrap();
        assert_eq!(r.first_violation().unwrap().assumption, Assumption::Shape);
        let jump = CostModel::linear(ScalarFn::custom(|x: f64| if x < 0.5 { 2.0 * x } else { 2.0 * x + 1.0 }));
        let r = validate(&jump, 0.5, 0.1, 4, 1, &g).unwrap();
        assert_eq!(r.first_violation().unwrap().assumption, Assumption::Shape);
        let r = validate(&race_kernel(), 1.0, 0.1, 8, 3, &g).unwrap();
        assert!(r.passed, "{:?}", r.violations);
        let no_tail = CostModel::tail_local(
            BivariateFn::Sum { x: ScalarFn::constant(1.0), q: ScalarFn::linear(0.5) },
            0.05,
        );
        let r = validate(&no_tail, 0.5, 0.1, 4, 1, &g).unwrap();
        assert!(r.violations.iter().any(|v| v.assumption == Assumption::Tail));
    }

    #[test]
    fn json_config_shape() {
        let text = r#"{"kind":"separable","gamma":{"form":"power","a":2.0,"p":1.0},"beta":{"form":"affine","a":0,"b":1}}"#;
        let m: CostModel<f64> = serde_json::from_str(text).unwrap();
        assert_eq!(m.quadrature_steps, 64);
        assert!(matches!(m.kind, CostKind::Separable { .. }));
        let bad = r#"{"kind":"linear","c":{"form":"power","a":2.0,"p":1.0},"extra":1}"#;
        assert!(serde_json::from_str::<CostModel<f64>>(bad).is_err());
        let back: CostModel<f64> = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back.quadrature_steps, 64);
    }

    #[test]
    fn time_round_trip() {
        for k in 1..=400 {
            let x = k as f64 / 400.0;
            let t = time_of(x).unwrap();
            assert!((x_of_time(t) - x).abs() < 1e-15);
        }
        assert_eq!(time_of(0.0f64), None);
        assert_eq!(time_of(1.0f64), Some(0.0));
    }
}
