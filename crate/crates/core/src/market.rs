//! Price-and-quality oligopoly with taste-shock smoothing Q̂ = (1−σ)Q + σε.
//!
//! The smoothed cdf F̂ is piecewise polynomial (quadratic for a piecewise-linear taste density),
//! so ω and the price condition are integrated exactly by Gauss–Legendre between breakpoints.

use std::sync::Arc;

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costfun::{evaluate, validate, CostModel};
use crate::eqsolver::{best_response_to, solve_symmetric_equilibrium, KKTReport, PrizeModel, SolverConfig, Start};
use crate::error::{invalid, violated, Error, Result};
use crate::gridmeasure::{Grid, GridDistribution};
use crate::quad::gauss_legendre;
use crate::scalar::{ipow, Scalar};

pub const DEFAULT_P_MAX: f64 = 2.0;
pub const REFINEMENT: usize = 4;
const MAX_OUTER: usize = 200;
const SCAN_POINTS: usize = 101;

/// Piecewise-linear taste density on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "S: Scalar")]
pub struct Taste<S: Scalar> {
    pub e: Vec<S>,
    pub density: Vec<S>,
}

impl<S: Scalar> Taste<S> {
    pub fn uniform() -> Self {
        Taste { e: vec![S::zero(), S::one()], density: vec![S::one(), S::one()] }
    }

    pub fn new(e: Vec<S>, density: Vec<S>) -> Result<Self> {
        let t = Taste { e, density };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        let (e, g) = (&self.e, &self.density);
        if e.len() < 2 || e.len() != g.len() {
            return invalid("taste table needs matching e and density columns of length ≥ 2");
        }
        if e[0] != S::zero() || e[e.len() - 1] != S::one() || e.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("taste nodes must increase strictly from 0 to 1");
        }
        if g.iter().any(|d| !(*d >= S::zero())) {
            return invalid("taste density must be nonnegative");
        }
        let mass = self.cdf(S::one());
        if (mass - S::one()).abs() > S::lit(1e-8) {
            return invalid(format!("taste density integrates to {mass}"));
        }
        Ok(())
    }

    pub fn pdf(&self, u: S) -> S {
        if u < S::zero() || u > S::one() {
            return S::zero();
        }
        let j = self.e.partition_point(|p| *p <= u).clamp(1, self.e.len() - 1);
        let (a, b) = (self.e[j - 1], self.e[j]);
        let s = (u - a) / (b - a);
        self.density[j - 1] + s * (self.density[j] - self.density[j - 1])
    }

    pub fn cdf(&self, u: S) -> S {
        if u <= S::zero() {
            return S::zero();
        }
        let u = u.min(S::one());
        let half = S::lit(0.5);
        let mut acc = S::zero();
        for j in 1..self.e.len() {
            let (a, b) = (self.e[j - 1], self.e[j]);
            if u <= a {
                break;
            }
            let top = u.min(b);
            acc += (top - a) * half * (self.density[j - 1] + self.pdf(top));
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct MarketSpec<S: Scalar> {
    pub n: usize,
    pub sigma: S,
    pub taste: Taste<S>,
    pub cost: CostModel<S>,
    pub p_max: S,
    pub grid: Arc<Grid<S>>,
    /// Margin η₁ for cost validation against π̄ = p_max.
    pub eta1: S,
    pub validation_trials: usize,
}

impl<S: Scalar> MarketSpec<S> {
    pub fn new(n: usize, sigma: S, taste: Taste<S>, cost: CostModel<S>, grid: Arc<Grid<S>>) -> Result<Self> {
        if n < 2 {
            return invalid("need at least two firms");
        }
        if !(sigma > S::zero() && sigma < S::one()) {
            return invalid("sigma must lie strictly inside (0, 1)");
        }
        taste.check()?;
        cost.check()?;
        Ok(MarketSpec {
            n,
            sigma,
            taste,
            cost,
            p_max: S::lit(DEFAULT_P_MAX),
            grid,
            eta1: S::lit(0.05),
            validation_trials: 8,
        })
    }

    pub fn smooth(&self, f: &GridDistribution<S>) -> SmoothedQuality<S> {
        convolve_hat(f, self.sigma, &self.taste)
    }
}

/// Law of Q̂ as a piecewise quadratic cdf, with samples on a refined grid.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct SmoothedQuality<S: Scalar> {
    pub sigma: S,
    pub z: Vec<S>,
    pub f_hat_cdf: Vec<S>,
    pub f_hat_density: Vec<S>,
    #[serde(skip)]
    breaks: Vec<S>,
    /// (value, slope, curvature) per piece in the local variable z − breaks[i].
    #[serde(skip)]
    pieces: Vec<(S, S, S)>,
}

fn dedupe<S: Scalar>(v: &mut Vec<S>) {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() <= S::tol(1e-14));
}

/// F̂(z) = Σ dF(x) G((z − (1−σ)x)/σ) and its density, exact on pieces and sampled at
/// `REFINEMENT`× the base resolution.
pub fn convolve_hat<S: Scalar>(f: &GridDistribution<S>, sigma: S, taste: &Taste<S>) -> SmoothedQuality<S> {
    let keep = S::one() - sigma;
    let support: Vec<(S, S)> =
        f.points().iter().zip(f.weights()).filter(|(_, w)| **w > S::zero()).map(|(x, w)| (keep * *x, *w)).collect();
    let exact = |z: S| -> S { support.iter().map(|(s, w)| *w * taste.cdf((z - *s) / sigma)).sum() };
    let mut breaks = vec![S::zero(), S::one()];
    for (s, _) in &support {
        for e in &taste.e {
            breaks.push(*s + sigma * *e);
        }
    }
    dedupe(&mut breaks);
    let two = S::lit(2.0);
    let pieces = breaks
        .windows(2)
        .map(|b| {
            let h = b[1] - b[0];
            let (y0, ym, y1) = (exact(b[0]), exact(b[0] + h / two), exact(b[1]));
            let c2 = two * (y1 - two * ym + y0) / (h * h);
            let c1 = (y1 - y0) / h - c2 * h;
            (y0, c1, c2)
        })
        .collect();
    let r = REFINEMENT * (f.len() - 1) + 1;
    let z: Vec<S> = (0..r).map(|j| S::of_usize(j) / S::of_usize(r - 1)).collect();
    let mut sm = SmoothedQuality { sigma, z, f_hat_cdf: vec![], f_hat_density: vec![], breaks, pieces };
    sm.f_hat_cdf = sm.z.iter().map(|z| sm.cdf(*z)).collect();
    sm.f_hat_density = sm.z.iter().map(|z| sm.density(*z)).collect();
    sm
}

impl<S: Scalar> SmoothedQuality<S> {
    fn piece(&self, z: S) -> usize {
        self.breaks.partition_point(|b| *b <= z).clamp(1, self.pieces.len()) - 1
    }

    pub fn cdf(&self, z: S) -> S {
        if z <= S::zero() {
            return S::zero();
        }
        if z >= S::one() {
            return S::one();
        }
        let i = self.piece(z);
        let (a, b, c) = self.pieces[i];
        let d = z - self.breaks[i];
        (a + d * (b + d * c)).max(S::zero()).min(S::one())
    }

    pub fn density(&self, z: S) -> S {
        if z < S::zero() || z > S::one() {
            return S::zero();
        }
        let i = self.piece(z);
        let (_, b, c) = self.pieces[i];
        (b + S::lit(2.0) * c * (z - self.breaks[i])).max(S::zero())
    }

    /// ∫ of `h(z)` over [lo, hi] with Gauss–Legendre of the given order on every piece.
    fn integrate(&self, lo: S, hi: S, extra: &[S], order: usize, h: impl Fn(S) -> S) -> S {
        let (xs, ws) = gauss_legendre(order);
        let mut cuts: Vec<S> = self.breaks.iter().copied().filter(|b| *b > lo && *b < hi).collect();
        cuts.extend(extra.iter().copied().filter(|b| *b > lo && *b < hi));
        cuts.push(lo);
        cuts.push(hi);
        dedupe(&mut cuts);
        let half = S::lit(0.5);
        let mut total = S::zero();
        for c in cuts.windows(2) {
            let (mid, rad) = (half * (c[0] + c[1]), half * (c[1] - c[0]));
            for (x, w) in xs.iter().zip(&ws) {
                total += S::lit(*w) * rad * h(mid + rad * S::lit(*x));
            }
        }
        total
    }

    /// ∫ f̂, computed exactly.
    pub fn density_mass(&self) -> S {
        self.integrate(S::zero(), S::one(), &[], 2, |z| self.density(z))
    }
}

/// ω(q) = ∫ F̂((1−σ)q + σe + r_shift)^{n−1} dG(e).
pub fn omega<S: Scalar>(q: S, sm: &SmoothedQuality<S>, taste: &Taste<S>, n: usize, r_shift: S) -> S {
    let sigma = sm.sigma;
    let a = (S::one() - sigma) * q + r_shift;
    let extra: Vec<S> = taste.e.iter().map(|e| a + sigma * *e).collect();
    let value = sm.integrate(a, a + sigma, &extra, n + 1, |z| {
        ipow(sm.cdf(z), n - 1) * taste.pdf((z - a) / sigma) / sigma
    });
    value.max(S::zero()).min(S::one())
}

fn omega_all<S: Scalar>(grid: &Grid<S>, sm: &SmoothedQuality<S>, taste: &Taste<S>, n: usize, r_shift: S) -> Vec<S> {
    grid.points().iter().map(|q| omega(*q, sm, taste, n, r_shift)).collect()
}

/// p = 1 / (n (n−1) ∫ F̂^{n−2} f̂² dz).
pub fn price_foc<S: Scalar>(sm: &SmoothedQuality<S>, n: usize) -> Result<S> {
    let integral = sm.integrate(S::zero(), S::one(), &[], n + 1, |z| {
        let d = sm.density(z);
        ipow(sm.cdf(z), n - 2) * d * d
    });
    if integral < S::lit(1e-12) {
        return Err(Error::NumericalFailure(format!("∫F̂^(n−2) f̂² = {integral} is too small")));
    }
    Ok(S::one() / (S::of_usize(n) * S::of_usize(n - 1) * integral))
}

/// Interim profit p·ω_F(q) of a firm pricing at p against symmetric rivals.
struct MarketPrize<'a, S: Scalar> {
    spec: &'a MarketSpec<S>,
    p: S,
}

impl<S: Scalar> PrizeModel<S> for MarketPrize<'_, S> {
    fn players(&self) -> usize {
        self.spec.n
    }

    fn grid(&self) -> &Arc<Grid<S>> {
        &self.spec.grid
    }

    fn prize_bound(&self) -> S {
        self.p
    }

    fn interim(&self, weights: &[S]) -> Result<Vec<S>> {
        let f = GridDistribution::from_raw_weights(self.spec.grid.clone(), weights.to_vec())?;
        let sm = self.spec.smooth(&f);
        let w = omega_all(&self.spec.grid, &sm, &self.spec.taste, self.spec.n, S::zero());
        Ok(w.into_iter().map(|o| self.p * o).collect())
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct MarketEquilibrium<S: Scalar> {
    pub distribution: GridDistribution<S>,
    pub smoothed: SmoothedQuality<S>,
    pub p: S,
    pub lambda_g: S,
    pub kkt: KKTReport<S>,
    /// |p − price_foc(F)| / p.
    pub foc_residual: S,
    pub support_span: (S, S),
    pub cost_gap: S,
    pub omega_gap: S,
    pub price_dev_gap: S,
    /// n·∫ω dF, the total win probability at the symmetric profile.
    pub win_mass: S,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl<S: Scalar> MarketEquilibrium<S> {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.outer_iterations,
                detail: format!("price residual {} with KKT sup {}", self.foc_residual, self.kkt.sup_violation),
            })
        }
    }
}

/// Alternates distributional equilibrium at fixed p with the price condition p ← price_foc(F).
pub fn solve_market<S: Scalar>(spec: &MarketSpec<S>, cfg: &SolverConfig<S>) -> Result<MarketEquilibrium<S>> {
    cfg.check()?;
    let report = validate(&spec.cost, spec.p_max, spec.eta1, spec.validation_trials, cfg.seed, &spec.grid)?;
    if let Some(v) = report.first_violation() {
        return violated(format!("{:?}: {}", v.assumption, v.detail));
    }
    let mut f = match &cfg.start {
        Start::Uniform => GridDistribution::uniform(spec.grid.clone()),
        Start::Weights(w) => GridDistribution::new(spec.grid.clone(), w.clone())?,
    };
    let mut p = price_foc(&spec.smooth(&f), spec.n)?;
    let mut inner = cfg.clone();
    let mut outer = 0;
    let mut converged = false;
    let mut kkt;
    loop {
        inner.start = Start::Weights(f.weights().to_vec());
        let sol = solve_symmetric_equilibrium(&MarketPrize { spec, p }, &spec.cost, &inner)?;
        f = sol.distribution;
        kkt = sol.kkt;
        let foc = price_foc(&spec.smooth(&f), spec.n)?;
        outer += 1;
        debug!("market outer {outer}: p {p} → {foc}, kkt sup {}", kkt.sup_violation);
        if kkt.converged && (p - foc).abs() <= cfg.kkt_tol * p {
            converged = true;
            break;
        }
        p = foc;
        if outer >= MAX_OUTER {
            break;
        }
    }
    if !(p > cfg.kkt_tol && p < spec.p_max - cfg.kkt_tol) {
        return violated(format!("price {p} is not interior to (0, {})", spec.p_max));
    }
    let sm = spec.smooth(&f);
    let foc_residual = (p - price_foc(&sm, spec.n)?).abs() / p;
    let omega_eq = omega_all(&spec.grid, &sm, &spec.taste, spec.n, S::zero());
    let c = spec.cost.kernel_of(&f);
    let support: Vec<usize> = (0..f.len()).filter(|&k| f.weights()[k] > cfg.support_eps).collect();
    let (lo, hi) = (support[0], support[support.len() - 1]);
    let win_mass = S::of_usize(spec.n) * omega_eq.iter().zip(f.weights()).map(|(o, w)| *o * *w).sum::<S>();
    let eq_value = p * omega_eq.iter().zip(f.weights()).map(|(o, w)| *o * *w).sum::<S>();
    let price_dev_gap = price_deviation_gap(spec, &f, &sm, p, eq_value, cfg)?;
    Ok(MarketEquilibrium {
        lambda_g: kkt.lambda,
        support_span: (f.points()[lo], f.points()[hi]),
        cost_gap: c[hi] - c[lo],
        omega_gap: omega_eq[hi] - omega_eq[lo],
        price_dev_gap,
        win_mass,
        foc_residual,
        outer_iterations: outer,
        converged,
        kkt,
        p,
        smoothed: sm,
        distribution: f,
    })
}

/// max over a uniform r-grid on [0, p_max] of the best joint deviation value minus the
/// equilibrium value.
fn price_deviation_gap<S: Scalar>(
    spec: &MarketSpec<S>,
    f: &GridDistribution<S>,
    sm: &SmoothedQuality<S>,
    p: S,
    eq_value: S,
    cfg: &SolverConfig<S>,
) -> Result<S> {
    let values = (0..SCAN_POINTS)
        .into_par_iter()
        .map(|j| {
            let r = spec.p_max * S::of_usize(j) / S::of_usize(SCAN_POINTS - 1);
            let a: Vec<S> = omega_all(&spec.grid, sm, &spec.taste, spec.n, p - r).into_iter().map(|o| r * o).collect();
            let br = best_response_to(&spec.grid, &a, &spec.cost, cfg, Some(f.weights()))?;
            let h = &br.distribution;
            let gain: S = a.iter().zip(h.weights()).map(|(a, w)| *a * *w).sum();
            Ok(gain - evaluate(&spec.cost, h, f)?)
        })
        .collect::<Result<Vec<S>>>()?;
    Ok(values.into_iter().fold(S::neg_infinity(), S::max) - eq_value)
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct LimitRow<S: Scalar> {
    pub n: usize,
    pub p: S,
    pub lambda_g: S,
    pub cost_gap: S,
    pub q_lo: S,
    pub q_hi: S,
    pub kkt_sup: S,
    pub price_dev_gap: S,
    pub converged: bool,
    /// cost_gap ≤ p + 10·kkt_tol.
    pub gap_bound: bool,
    /// span ≤ cost_gap/κ + 10·kkt_tol, when a steepness is declared.
    pub steepness_bound: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct LimitTable<S: Scalar> {
    pub rows: Vec<LimitRow<S>>,
    /// p_n strictly decreasing; None with fewer than two rows.
    pub prices_decreasing: Option<bool>,
}

/// Solves the market for each n (in parallel, reported in input order).
pub fn limit_sweep<S: Scalar>(base: &MarketSpec<S>, n_list: &[usize], cfg: &SolverConfig<S>) -> Result<LimitTable<S>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("n_list must be strictly ascending");
    }
    let tol = S::lit(10.0) * cfg.kkt_tol;
    let rows = n_list
        .par_iter()
        .map(|&n| {
            let spec = MarketSpec { n, ..base.clone() };
            if n < 2 {
                return invalid("need at least two firms");
            }
            let eq = solve_market(&spec, cfg)?;
            let span = eq.support_span.1 - eq.support_span.0;
            Ok(LimitRow {
                n,
                p: eq.p,
                lambda_g: eq.lambda_g,
                cost_gap: eq.cost_gap,
                q_lo: eq.support_span.0,
                q_hi: eq.support_span.1,
                kkt_sup: eq.kkt.sup_violation,
                price_dev_gap: eq.price_dev_gap,
                converged: eq.converged,
                gap_bound: eq.cost_gap <= eq.p + tol,
                steepness_bound: spec.cost.steepness.map(|k| span <= eq.cost_gap / k + tol),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let prices_decreasing = (rows.len() > 1).then(|| rows.windows(2).all(|w| w[1].p < w[0].p));
    Ok(LimitTable { rows, prices_decreasing })
}
