//! Minimum-time races and price-free quality competition, solved in x = 1/(1+t) coordinates.
//!
//! The node x = 0 stands for t = ∞ (never finishing) and carries V = 0 and cost c_∞.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::costfun::{time_of, validate, CostKind, CostModel};
use crate::eqsolver::{planner_gradient, solve_planner, solve_symmetric_equilibrium, KKTReport, PrizeKind, PrizeSpec, SolverConfig};
use crate::error::{invalid, violated, Error, Result};
use crate::funcs::ScalarFn;
use crate::gridmeasure::{cdf_of, fosd_compare, Grid, GridDistribution, OrderVerdict};
use crate::scalar::{ipow, Scalar};

/// Finishing times induced by an x-grid; t = ∞ at x = 0.
#[derive(Debug, Clone)]
pub struct TimeGrid<S: Scalar> {
    pub x_grid: Arc<Grid<S>>,
    pub t_points: Vec<S>,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(x_grid: Arc<Grid<S>>) -> Self {
        let t_points = x_grid.points().iter().map(|x| time_of(*x).unwrap_or(S::infinity())).collect();
        TimeGrid { x_grid, t_points }
    }

    /// Grid index of time t (∞ allowed).
    pub fn index_of(&self, t: S) -> Result<usize> {
        if t.is_infinite() && t > S::zero() {
            return Ok(0);
        }
        if !(t >= S::zero()) {
            return invalid(format!("time {t} is negative"));
        }
        // times decrease along the grid
        let k = self.t_points.partition_point(|p| *p > t);
        if k < self.t_points.len() && (self.t_points[k] - t).abs() <= S::tol(1e-12) * (S::one() + t) {
            return Ok(k);
        }
        if k > 0 && (self.t_points[k - 1] - t).abs() <= S::tol(1e-12) * (S::one() + t) {
            return Ok(k - 1);
        }
        invalid(format!("time {t} is not a grid time"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields, bound = "S: Scalar")]
pub enum RaceMode<S: Scalar> {
    /// V(t) = e^{−rt}.
    Rd { r: S },
    /// V(t) = m·D(1/(1+t)).
    Quality { m: S, demand: ScalarFn<S> },
}

#[derive(Debug, Clone)]
pub struct RaceSpec<S: Scalar> {
    pub n: usize,
    pub mode: RaceMode<S>,
    pub cost: CostModel<S>,
    pub grid: TimeGrid<S>,
    /// Margin η₁ in the top-cost check κ(0,·) ≥ c_∞ + π̄ + η₁.
    pub eta1: S,
    pub validation_trials: usize,
    pub planner_restarts: usize,
}

impl<S: Scalar> RaceSpec<S> {
    pub fn new(n: usize, mode: RaceMode<S>, cost: CostModel<S>, grid: Arc<Grid<S>>) -> Result<Self> {
        if n < 2 {
            return invalid("need at least two players");
        }
        if !matches!(cost.kind, CostKind::TailLocal { .. }) {
            return invalid("race cost must be tail-local");
        }
        match &mode {
            RaceMode::Rd { r } if !(*r > S::zero()) => return invalid("discount rate must be positive"),
            RaceMode::Quality { m, demand } => {
                demand.check()?;
                if !(*m > S::zero()) {
                    return invalid("margin must be positive");
                }
                if demand.eval(S::zero()).abs() > S::tol(1e-12) {
                    return invalid("demand must vanish at zero quality");
                }
                let pts = grid.points();
                if pts[1..].iter().any(|q| !(demand.eval(*q) > S::zero())) {
                    return violated("demand must be positive at positive quality");
                }
                if pts.windows(2).any(|w| demand.eval(w[1]) < demand.eval(w[0])) {
                    return invalid("demand must be nondecreasing");
                }
            }
            _ => {}
        }
        Ok(RaceSpec { n, mode, cost, grid: TimeGrid::new(grid), eta1: S::lit(0.1), validation_trials: 8, planner_restarts: 1 })
    }

    pub fn c_inf(&self) -> S {
        match &self.cost.kind {
            CostKind::TailLocal { c_inf, .. } => *c_inf,
            _ => unreachable!("checked at construction"),
        }
    }

    /// V at a finishing time, with V(∞) = 0.
    pub fn value(&self, t: S) -> S {
        if t.is_infinite() {
            return S::zero();
        }
        match &self.mode {
            RaceMode::Rd { r } => (-*r * t).exp(),
            RaceMode::Quality { m, demand } => *m * demand.eval(S::one() / (S::one() + t)),
        }
    }

    /// π̄ = V(0).
    pub fn prize_bound(&self) -> S {
        self.value(S::zero())
    }

    fn values(&self) -> Vec<S> {
        self.grid.t_points.iter().map(|t| self.value(*t)).collect()
    }

    /// The race as a winner-take-all prize on the x-grid.
    pub fn prize_spec(&self) -> PrizeSpec<S> {
        let kind = match &self.mode {
            RaceMode::Rd { r } => PrizeKind::MinRace(ScalarFn::ExpDecay { a: S::one(), rate: *r }),
            RaceMode::Quality { m, demand } => {
                let (m, demand) = (*m, demand.clone());
                PrizeKind::MaxQuality(ScalarFn::custom(move |q| m * demand.eval(q)))
            }
        };
        PrizeSpec { n: self.n, kind, grid: self.grid.x_grid.clone() }
    }

    fn check_grid(&self, h: &GridDistribution<S>) -> Result<()> {
        if h.grid().as_ref() != self.grid.x_grid.as_ref() {
            return invalid("distribution is not on the race grid");
        }
        Ok(())
    }
}

/// P(all n − 1 opponents finish later than t_k) = F(x_{k−1})^{n−1}.
fn survival_power<S: Scalar>(cdf: &[S], k: usize, others: usize) -> S {
    if k == 0 {
        S::zero()
    } else {
        ipow(cdf[k - 1], others)
    }
}

/// Φ(H, t) = V(t)(1−H(t))^{n−1} − c_H(t); −c_∞ at t = ∞.
pub fn phi<S: Scalar>(spec: &RaceSpec<S>, h: &GridDistribution<S>, t: S) -> Result<S> {
    spec.check_grid(h)?;
    let k = spec.grid.index_of(t)?;
    Ok(phi_all(spec, h)[k])
}

/// Φ at every grid node.
pub fn phi_all<S: Scalar>(spec: &RaceSpec<S>, h: &GridDistribution<S>) -> Vec<S> {
    let cdf = cdf_of(h.weights());
    let c = spec.cost.kernel_of(h);
    let v = spec.values();
    (0..cdf.len())
        .map(|k| if k == 0 { -c[0] } else { v[k] * survival_power(&cdf, k, spec.n - 1) - c[k] })
        .collect()
}

/// Ṽ_H(t) = E[V(M) 1{M > t}], M the earliest of n − 1 iid finishing times.
pub fn v_tilde<S: Scalar>(spec: &RaceSpec<S>, h: &GridDistribution<S>, t: S) -> Result<S> {
    spec.check_grid(h)?;
    let k = spec.grid.index_of(t)?;
    Ok(v_tilde_all(spec, h)[k])
}

pub fn v_tilde_all<S: Scalar>(spec: &RaceSpec<S>, h: &GridDistribution<S>) -> Vec<S> {
    let cdf = cdf_of(h.weights());
    let v = spec.values();
    let others = spec.n - 1;
    let mut out = vec![S::zero(); cdf.len()];
    let mut acc = S::zero();
    let mut prev = S::zero();
    for k in 0..cdf.len() {
        out[k] = acc;
        let p = ipow(cdf[k], others);
        acc += v[k] * (p - prev);
        prev = p;
    }
    out
}

/// |A_F(t) − (A_F(∞) + V(t)(1−F(t))^{n−1} − Ṽ_F(t))|.
pub fn aggregate_decomposition_check<S: Scalar>(spec: &RaceSpec<S>, f: &GridDistribution<S>, t: S) -> Result<S> {
    spec.check_grid(f)?;
    let k = spec.grid.index_of(t)?;
    let big_a = planner_gradient(&spec.prize_spec(), f)?;
    let cdf = cdf_of(f.weights());
    let lead = spec.value(spec.grid.t_points[k]) * survival_power(&cdf, k, spec.n - 1);
    let rhs = big_a[0] + lead - v_tilde_all(spec, f)[k];
    Ok((big_a[k] - rhs).abs())
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct RaceSolution<S: Scalar> {
    /// Equilibrium and planner laws on the x-grid; see [`RaceSolution::time_cdf`].
    pub f_eq: GridDistribution<S>,
    pub g_pl: GridDistribution<S>,
    pub eq_kkt: KKTReport<S>,
    pub pl_kkt: KKTReport<S>,
    pub lambda_g: S,
    pub lambda_p_bar: S,
    /// λ̄_p − A_G(∞).
    pub lambda_p: S,
    pub c_inf: S,
    /// |λ_g + c_∞| and |λ_p + c_∞|.
    pub pinning_g: S,
    pub pinning_p: S,
    /// fosd_compare(F_eq, G_pl) in x, i.e. F(t) ≥ G(t) − tol in time.
    pub fosd: OrderVerdict<S>,
    /// max_t (G(t) − F(t)).
    pub fosd_shortfall: S,
    pub planner_objective: S,
}

impl<S: Scalar> RaceSolution<S> {
    pub fn converged(&self) -> bool {
        self.eq_kkt.converged && self.pl_kkt.converged
    }

    pub fn require_converged(self) -> Result<Self> {
        if self.converged() {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.eq_kkt.iterations.max(self.pl_kkt.iterations),
                detail: "race equilibrium or planner solve did not converge".into(),
            })
        }
    }
}

/// Time-axis cdf H(t_k) = P(T ≤ t_k) = 1 − F(x_{k−1}); the entry at t = ∞ is 1.
pub fn time_cdf<S: Scalar>(f: &GridDistribution<S>) -> Vec<S> {
    let cdf = f.cdf();
    (0..cdf.len()).map(|k| if k == 0 { S::one() } else { S::one() - cdf[k - 1] }).collect()
}

/// Equilibrium and planner solves with multipliers and the FOSD comparison.
pub fn solve_race<S: Scalar>(spec: &RaceSpec<S>, cfg: &SolverConfig<S>) -> Result<RaceSolution<S>> {
    let report = validate(&spec.cost, spec.prize_bound(), spec.eta1, spec.validation_trials, cfg.seed, &spec.grid.x_grid)?;
    if let Some(v) = report.first_violation() {
        return violated(format!("{:?}: {}", v.assumption, v.detail));
    }
    let prize = spec.prize_spec();
    let eq = solve_symmetric_equilibrium(&prize, &spec.cost, cfg)?;
    let pl = solve_planner(&prize, &spec.cost, cfg, spec.planner_restarts)?;
    let a_inf = planner_gradient(&prize, &pl.distribution)?[0];
    let c_inf = spec.c_inf();
    let lambda_p = pl.kkt.lambda - a_inf;
    let fosd = fosd_compare(&eq.distribution, &pl.distribution, S::lit(5.0) * cfg.kkt_tol)?;
    let fosd_shortfall = time_cdf(&pl.distribution)
        .iter()
        .zip(time_cdf(&eq.distribution))
        .map(|(g, f)| *g - f)
        .fold(S::zero(), S::max);
    Ok(RaceSolution {
        lambda_g: eq.kkt.lambda,
        lambda_p_bar: pl.kkt.lambda,
        lambda_p,
        c_inf,
        pinning_g: (eq.kkt.lambda + c_inf).abs(),
        pinning_p: (lambda_p + c_inf).abs(),
        fosd,
        fosd_shortfall,
        planner_objective: pl.objective.unwrap_or(S::zero()),
        f_eq: eq.distribution,
        g_pl: pl.distribution,
        eq_kkt: eq.kkt,
        pl_kkt: pl.kkt,
    })
}

/// The quality race: same pipeline with V_q(t) = m·D(1/(1+t)); FOSD in x reads as
/// stochastic overprovision of quality.
pub fn quality_race<S: Scalar>(spec: &RaceSpec<S>, cfg: &SolverConfig<S>) -> Result<RaceSolution<S>> {
    if !matches!(spec.mode, RaceMode::Quality { .. }) {
        return invalid("quality race needs a quality-mode spec");
    }
    solve_race(spec, cfg)
}

/// One row of the race table.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct RaceRow<S: Scalar> {
    pub t: S,
    pub f_eq: S,
    pub g_pl: S,
    pub phi_eq: S,
    pub phi_pl: S,
    pub v_tilde: S,
}

/// Table over grid times in increasing t (the ∞ node last).
pub fn race_table<S: Scalar>(spec: &RaceSpec<S>, sol: &RaceSolution<S>) -> Vec<RaceRow<S>> {
    let (hf, hg) = (time_cdf(&sol.f_eq), time_cdf(&sol.g_pl));
    let (pf, pg) = (phi_all(spec, &sol.f_eq), phi_all(spec, &sol.g_pl));
    let vt = v_tilde_all(spec, &sol.g_pl);
    (0..hf.len())
        .rev()
        .map(|k| RaceRow { t: spec.grid.t_points[k], f_eq: hf[k], g_pl: hg[k], phi_eq: pf[k], phi_pl: pg[k], v_tilde: vt[k] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::BivariateFn;

    fn desk(m: usize) -> RaceSpec<f64> {
        let kappa = BivariateFn::Product {
            x: ScalarFn::ExpDecay { a: 1.0, rate: 2.0 },
            q: ScalarFn::Affine { a: 1.2, b: 0.3 },
            offset: 0.05,
        };
        let grid = Arc::new(Grid::uniform(m).unwrap());
        RaceSpec::new(2, RaceMode::Rd { r: 1.0 }, CostModel::tail_local(kappa, 0.05), grid).unwrap()
    }

    #[test]
    fn time_grid_round_trip() {
        let tg = desk(51).grid;
        assert_eq!(tg.t_points[0], f64::INFINITY);
        assert_eq!(tg.t_points[50], 0.0);
        assert!(tg.t_points.windows(2).all(|w| w[1] < w[0]));
        for (k, t) in tg.t_points.iter().enumerate() {
            assert_eq!(tg.index_of(*t).unwrap(), k);
        }
        assert!(tg.index_of(0.123).is_err());
    }

    #[test]
    fn phi_examples() {
        let spec = desk(51);
        let g = spec.grid.x_grid.clone();
        let never = GridDistribution::point_mass(g.clone(), 0).unwrap();
        let at0 = phi(&spec, &never, 0.0).unwrap();
        // κ(0, H(0)) with H(0) = 0
        assert!((at0 - (1.0 - 1.25)).abs() < 1e-14);
        assert_eq!(phi(&spec, &never, f64::INFINITY).unwrap(), -0.05);
        assert!(phi(&spec, &never, 0.3).is_err());
    }

    #[test]
    fn v_tilde_two_atoms() {
        let spec = desk(101);
        let g = spec.grid.x_grid.clone();
        // t = 1 at x = 1/2, t = 2 at x = 1/3 is not on this grid; use t = 1 and t = 4 (x = 0.2)
        let mut w = vec![0.0; 101];
        w[50] = 0.5;
        w[20] = 0.5;
        let h = GridDistribution::new(g, w).unwrap();
        let vt = v_tilde(&spec, &h, 1.0).unwrap();
        assert!((vt - 0.5 * (-4.0f64).exp()).abs() < 1e-14);
        assert_eq!(v_tilde(&spec, &h, 0.0).unwrap() > 0.0, true);
        assert!(v_tilde(&spec, &h, 4.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn decomposition_identity() {
        let spec = desk(41);
        let g = spec.grid.x_grid.clone();
        let mut w = vec![0.0; 41];
        w[7] = 0.3;
        w[30] = 0.7;
        let f = GridDistribution::new(g, w).unwrap();
        for t in spec.grid.t_points.clone() {
            assert!(aggregate_decomposition_check(&spec, &f, t).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn quality_mode_rejections() {
        let grid: Arc<Grid<f64>> = Arc::new(Grid::uniform(21).unwrap());
        let kappa = BivariateFn::Sum { x: ScalarFn::constant(1.5), q: ScalarFn::constant(0.0) };
        let cost = CostModel::tail_local(kappa, 0.05);
        let zero = RaceMode::Quality { m: 1.0, demand: ScalarFn::constant(0.0) };
        assert!(RaceSpec::new(2, zero, cost.clone(), grid.clone()).is_err());
        let ok = RaceMode::Quality { m: 1.0, demand: ScalarFn::linear(1.0) };
        let spec = RaceSpec::new(2, ok, cost.clone(), grid.clone()).unwrap();
        assert!((spec.value(1.0) - 0.5).abs() < 1e-15);
        assert!(quality_race(&desk(21), &SolverConfig::default()).is_err());
    }
}
