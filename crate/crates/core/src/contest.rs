//! Rank-order contests with separable or local costs: closed-form equilibria, prize inequality
//! and entry comparative statics.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::costfun::{CostKind, CostModel};
use crate::error::{invalid, violated, Result};
use crate::funcs::{BivariateFn, ScalarFn};
use crate::gridmeasure::{convex_order_compare, fosd_compare, icx_compare, majorizes, Grid, GridDistribution, OrderVerdict, PrizeVector};
use crate::quad::{bisect_increasing, integrate};
use crate::scalar::{binom, ipow, Scalar};

/// Resolution of the q-grid on which g = Ψ − β is sampled.
pub const Q_SAMPLES: usize = 1001;
const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ContestSpec<S: Scalar> {
    pub n: usize,
    pub v: PrizeVector<S>,
    pub cost: CostModel<S>,
}

impl<S: Scalar> ContestSpec<S> {
    pub fn new(v: PrizeVector<S>, cost: CostModel<S>) -> Result<Self> {
        cost.check()?;
        if !matches!(cost.kind, CostKind::Separable { .. } | CostKind::Local { .. }) {
            return invalid("contest cost must be separable or local");
        }
        Ok(ContestSpec { n: v.n(), v, cost })
    }

    fn separable(&self) -> Result<(&ScalarFn<S>, &ScalarFn<S>)> {
        match &self.cost.kind {
            CostKind::Separable { gamma, beta } => Ok((gamma, beta)),
            _ => invalid("the closed form needs a separable cost"),
        }
    }

    /// g(q) = Ψ(q; v) − β(q).
    pub fn g(&self, q: S) -> Result<S> {
        let (_, beta) = self.separable()?;
        Ok(psi_unchecked(q, &self.v) - beta.eval(q))
    }

    fn g_samples(&self) -> Result<Vec<S>> {
        (0..Q_SAMPLES).map(|k| self.g(S::of_usize(k) / S::of_usize(Q_SAMPLES - 1))).collect()
    }
}

fn psi_unchecked<S: Scalar>(q: S, v: &PrizeVector<S>) -> S {
    let n = v.n();
    v.as_slice()
        .iter()
        .enumerate()
        .map(|(k, vk)| binom::<S>(n - 1, k) * ipow(q, n - 1 - k) * ipow(S::one() - q, k) * *vk)
        .sum()
}

/// Expected prize at quantile q of a common atomless distribution.
pub fn psi<S: Scalar>(q: S, v: &PrizeVector<S>) -> Result<S> {
    if !(q >= S::zero() && q <= S::one()) {
        return invalid(format!("quantile {q} outside [0, 1]"));
    }
    Ok(psi_unchecked(q, v))
}

/// ∫₀¹ Ψ(q; v) dq by composite 5-point Gauss–Legendre with at least `nodes` nodes.
pub fn psi_mean_check<S: Scalar>(v: &PrizeVector<S>, nodes: usize) -> Result<S> {
    if nodes < 101 {
        return invalid("need at least 101 quadrature nodes");
    }
    Ok(integrate(|q| psi_unchecked(q, v), S::zero(), S::one(), nodes.div_ceil(5), 5))
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct ContestEquilibrium<S: Scalar> {
    pub distribution: GridDistribution<S>,
    pub support_upper: S,
    pub lambda: S,
    pub g_samples: Vec<S>,
    /// γ(1) equals g(1): support reaches 1 without an atom.
    pub support_touches_one: bool,
    /// v1 > v2 held, so the equilibrium is the unique symmetric one.
    pub unique: bool,
    #[serde(skip)]
    spec: ContestSpec<S>,
}

impl<S: Scalar> ContestEquilibrium<S> {
    /// Continuous equilibrium cdf g⁻¹(γ(x)), before discretization.
    pub fn continuous_cdf(&self, x: S) -> S {
        if x <= S::zero() {
            return S::zero();
        }
        if x >= self.support_upper {
            return S::one();
        }
        let (gamma, _) = self.spec.separable().expect("checked at construction");
        g_inverse(&self.spec, gamma.eval(x))
    }

    /// Quantile of the continuous equilibrium law.
    pub fn continuous_quantile(&self, q: S) -> S {
        bisect_increasing(|x| self.continuous_cdf(x), q, S::zero(), self.support_upper, S::lit(ROOT_TOL))
    }

    /// E γ(X) as ∫₀^{g(1)} (1 − g⁻¹(y)) dy, with a smoothstep substitution for endpoint singularities.
    pub fn mean_gamma(&self) -> S {
        let top = self.g_samples[Q_SAMPLES - 1];
        let (two, three, six) = (S::lit(2.0), S::lit(3.0), S::lit(6.0));
        integrate(
            |s: S| {
                let y = top * (three * s * s - two * s * s * s);
                let dy = six * top * s * (S::one() - s);
                (S::one() - g_inverse(&self.spec, y)) * dy
            },
            S::zero(),
            S::one(),
            200,
            5,
        )
    }
}

fn g_inverse<S: Scalar>(spec: &ContestSpec<S>, y: S) -> S {
    bisect_increasing(|q| spec.g(q).unwrap(), y, S::zero(), S::one(), S::lit(1e-14))
}

/// Unique symmetric equilibrium of a separable-cost contest. The grid law samples the
/// continuous cdf at cell midpoints: F(x₀) = 0, F(x_k) = F_c((x_k + x_{k+1})/2), F(x_last) = 1.
pub fn solve_closed_form<S: Scalar>(spec: &ContestSpec<S>, grid: &Arc<Grid<S>>) -> Result<ContestEquilibrium<S>> {
    let v = spec.v.as_slice();
    if v[0] <= v[1] {
        return violated("closed form needs v1 > v2");
    }
    closed_form_candidate(spec, grid)
}

/// The same construction without the v1 > v2 requirement. With a tie at the top the result is
/// still a symmetric equilibrium but uniqueness is not guaranteed (`unique` is false).
pub fn closed_form_candidate<S: Scalar>(spec: &ContestSpec<S>, grid: &Arc<Grid<S>>) -> Result<ContestEquilibrium<S>> {
    let (gamma, _) = spec.separable()?;
    let v = spec.v.as_slice();
    let g_samples = spec.g_samples()?;
    if let Some(k) = g_samples.windows(2).position(|w| w[1] <= w[0]) {
        return violated(format!(
            "g = Ψ − β is not strictly increasing near q = {}",
            S::of_usize(k) / S::of_usize(Q_SAMPLES - 1)
        ));
    }
    let top = g_samples[Q_SAMPLES - 1];
    let gamma_one = gamma.eval(S::one());
    let root_tol = S::lit(ROOT_TOL);
    if gamma_one < top - root_tol {
        return violated(format!("γ(1) = {gamma_one} is below g(1) = {top}"));
    }
    let support_touches_one = (gamma_one - top).abs() <= root_tol;
    let support_upper =
        if support_touches_one { S::one() } else { bisect_increasing(|x| gamma.eval(x), top, S::zero(), S::one(), root_tol) };
    let mut eq = ContestEquilibrium {
        distribution: GridDistribution::uniform(grid.clone()),
        support_upper,
        lambda: S::zero(),
        g_samples,
        support_touches_one,
        unique: v[0] > v[1],
        spec: spec.clone(),
    };
    let x = grid.points();
    let m = x.len();
    let half = S::lit(0.5);
    let cdf: Vec<S> = (0..m)
        .map(|k| {
            if k == 0 {
                S::zero()
            } else if k + 1 == m {
                S::one()
            } else {
                eq.continuous_cdf(half * (x[k] + x[k + 1]))
            }
        })
        .collect();
    eq.distribution = GridDistribution::from_cdf(grid.clone(), &cdf)?;
    Ok(eq)
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct IcxCheck<S: Scalar> {
    /// convex_order_compare(g_w, g_v): `dominates` means γ(Y) is the more dispersed.
    pub quantile_order: OrderVerdict<S>,
    /// icx_compare(Y, X) on the grid equilibria.
    pub icx: OrderVerdict<S>,
    /// Largest |quantile of γ(X) − g_v| (and the same for Y, g_w) on the q-grid.
    pub quantile_error_v: S,
    pub quantile_error_w: S,
    /// Sign changes of g_w − g_v on the q-grid and the first crossing location.
    pub sign_changes: usize,
    pub crossing: Option<S>,
    pub mean_gamma_x: S,
    pub mean_gamma_y: S,
    /// 1/n − ∫β.
    pub mean_expected: S,
    pub x: ContestEquilibrium<S>,
    pub y: ContestEquilibrium<S>,
}

impl<S: Scalar> IcxCheck<S> {
    pub fn holds(&self) -> bool {
        self.quantile_order.weakly_dominates() && self.icx.weakly_dominates()
    }
}

/// Checks that the more unequal prize vector w induces an icx-larger equilibrium.
pub fn icx_theorem_check<S: Scalar>(
    spec_v: &ContestSpec<S>,
    spec_w: &ContestSpec<S>,
    grid: &Arc<Grid<S>>,
    tol: S,
) -> Result<IcxCheck<S>> {
    if spec_v.n != spec_w.n {
        return invalid("prize vectors have different lengths");
    }
    if !majorizes(&spec_w.v, &spec_v.v)? {
        return invalid("w does not majorize v");
    }
    let (gv, bv) = spec_v.separable()?;
    let (gw, bw) = spec_w.separable()?;
    let probe: Vec<S> = (0..=20).map(|k| S::of_usize(k) / S::lit(20.0)).collect();
    if probe.iter().any(|x| gv.eval(*x) != gw.eval(*x) || bv.eval(*x) != bw.eval(*x)) {
        return invalid("both contests must share the cost");
    }
    let x = closed_form_candidate(spec_v, grid)?;
    let y = closed_form_candidate(spec_w, grid)?;
    let quantile_error = |eq: &ContestEquilibrium<S>, gamma: &ScalarFn<S>| {
        (1..Q_SAMPLES - 1)
            .map(|k| {
                let q = S::of_usize(k) / S::of_usize(Q_SAMPLES - 1);
                (gamma.eval(eq.continuous_quantile(q)) - eq.g_samples[k]).abs()
            })
            .fold(S::zero(), S::max)
    };
    let quantile_order = convex_order_compare(&y.g_samples, &x.g_samples, tol)?;
    let icx = icx_compare(&y.distribution, &x.distribution, tol)?;
    let diff: Vec<S> = y.g_samples.iter().zip(&x.g_samples).map(|(a, b)| *a - *b).collect();
    let mut sign_changes = 0;
    let mut crossing = None;
    let mut last = S::zero();
    for (k, d) in diff.iter().enumerate() {
        if d.abs() <= S::lit(1e-13) {
            continue;
        }
        if last != S::zero() && (*d > S::zero()) != (last > S::zero()) {
            sign_changes += 1;
            crossing.get_or_insert(S::of_usize(k) / S::of_usize(Q_SAMPLES - 1));
        }
        last = *d;
    }
    let mean_expected =
        S::one() / S::of_usize(spec_v.n) - integrate(|q| bv.eval(q), S::zero(), S::one(), 200, 5);
    Ok(IcxCheck {
        quantile_order,
        icx,
        quantile_error_v: quantile_error(&x, gv),
        quantile_error_w: quantile_error(&y, gw),
        sign_changes,
        crossing,
        mean_gamma_x: x.mean_gamma(),
        mean_gamma_y: y.mean_gamma(),
        mean_expected,
        x,
        y,
    })
}

fn local_kappa<S: Scalar>(cost: &CostModel<S>) -> Result<&BivariateFn<S>> {
    match &cost.kind {
        CostKind::Local { kappa } => Ok(kappa),
        _ => invalid("entry analysis needs a local cost"),
    }
}

/// Winner-take-all equilibrium quantile with n players: the x solving κ(x, q) = q^{n−1}.
pub fn entry_quantile<S: Scalar>(kappa: &CostModel<S>, n: usize, q: S) -> Result<S> {
    let kappa = local_kappa(kappa)?;
    if n < 2 {
        return invalid("need at least two players");
    }
    if !(q >= S::zero() && q <= S::one()) {
        return invalid(format!("quantile {q} outside [0, 1]"));
    }
    let target = ipow(q, n - 1);
    if kappa.eval(S::zero(), q) >= target {
        return Ok(S::zero());
    }
    if kappa.eval(S::one(), q) < target {
        return violated(format!("κ(1, {q}) < q^(n−1): no root in [0, 1]"));
    }
    Ok(bisect_increasing(|x| kappa.eval(x, q), target, S::zero(), S::one(), S::lit(ROOT_TOL)))
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct EntrySweep<S: Scalar> {
    pub n_list: Vec<usize>,
    pub distributions: Vec<GridDistribution<S>>,
    /// fosd_compare(F_n, F_{n+1}) for consecutive entries; `dominates` means entry lowers output.
    pub verdicts: Vec<OrderVerdict<S>>,
}

/// Equilibrium cdfs for each n, sampled at grid points by inverting the quantile function.
pub fn entry_sweep<S: Scalar>(
    kappa: &CostModel<S>,
    n_list: &[usize],
    grid: &Arc<Grid<S>>,
    tol: S,
) -> Result<EntrySweep<S>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] < 2 {
        return invalid("n_list must be strictly ascending with entries ≥ 2");
    }
    local_kappa(kappa)?;
    let distributions = n_list
        .par_iter()
        .map(|&n| entry_distribution(kappa, n, grid))
        .collect::<Result<Vec<_>>>()?;
    let verdicts = distributions
        .windows(2)
        .map(|p| fosd_compare(&p[0], &p[1], tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(EntrySweep { n_list: n_list.to_vec(), distributions, verdicts })
}

fn entry_distribution<S: Scalar>(kappa: &CostModel<S>, n: usize, grid: &Arc<Grid<S>>) -> Result<GridDistribution<S>> {
    entry_quantile(kappa, n, S::one())?;
    let x = grid.points();
    let m = x.len();
    let mut cdf = Vec::with_capacity(m);
    for (k, &xk) in x.iter().enumerate() {
        if k + 1 == m {
            cdf.push(S::one());
            continue;
        }
        // F(x) = sup{q : Q(q) ≤ x}
        let (mut lo, mut hi) = (S::zero(), S::one());
        if entry_quantile(kappa, n, hi)? <= xk {
            cdf.push(S::one());
            continue;
        }
        for _ in 0..60 {
            let mid = (lo + hi) / S::lit(2.0);
            if entry_quantile(kappa, n, mid)? <= xk {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        cdf.push(lo);
    }
    GridDistribution::from_cdf(grid.clone(), &cdf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqsolver::{kkt_residual, Mode, PrizeSpec};

    fn pv(v: &[f64]) -> PrizeVector<f64> {
        PrizeVector::new(v.to_vec()).unwrap()
    }

    fn sep(gamma: f64, beta: ScalarFn<f64>) -> CostModel<f64> {
        CostModel::separable(ScalarFn::linear(gamma), beta)
    }

    #[test]
    fn psi_examples() {
        let v = pv(&[0.6, 0.3, 0.1, 0.0]);
        assert!((psi(1.0, &v).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(psi(0.0, &v).unwrap(), 0.0);
        assert!((psi(0.5, &pv(&[1.0, 0.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!(psi(1.5, &v).is_err());
        assert!((psi_mean_check(&pv(&[1.0, 0.0]), 101).unwrap() - 0.5).abs() < 1e-12);
        assert!((psi_mean_check(&pv(&[1.0, 0.0, 0.0]), 101).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((psi_mean_check(&pv(&[0.5, 0.5, 0.0]), 101).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(psi_mean_check(&v, 50).is_err());
    }

    #[test]
    fn closed_form_examples() {
        let grid = Arc::new(Grid::uniform(201).unwrap());
        let spec = ContestSpec::new(pv(&[1.0, 0.0]), sep(2.0, ScalarFn::constant(0.0))).unwrap();
        let eq = solve_closed_form(&spec, &grid).unwrap();
        assert!((eq.support_upper - 0.5).abs() < 1e-11);
        for x in [0.1, 0.25, 0.49, 0.7] {
            assert!((eq.continuous_cdf(x) - (2.0 * x).min(1.0)).abs() < 1e-12);
        }
        let kkt = kkt_residual(&PrizeSpec::rank_order(spec.v.clone(), grid.clone()).unwrap(), &eq.distribution, &spec.cost, Mode::Game).unwrap();
        assert!(kkt.sup_violation <= 2.0 / 201.0, "{}", kkt.sup_violation);

        let spec3 = ContestSpec::new(pv(&[1.0, 0.0, 0.0]), sep(2.0, ScalarFn::constant(0.0))).unwrap();
        let eq3 = solve_closed_form(&spec3, &grid).unwrap();
        for x in [0.02, 0.1, 0.3, 0.45] {
            assert!((eq3.continuous_cdf(x) - (2.0 * x).sqrt()).abs() < 1e-12);
        }

        let flat = ContestSpec::new(pv(&[1.0, 0.0]), sep(2.0, ScalarFn::linear(1.0))).unwrap();
        assert!(matches!(solve_closed_form(&flat, &grid), Err(crate::Error::AssumptionViolated(_))));
        let short = ContestSpec::new(pv(&[1.0, 0.0]), sep(0.5, ScalarFn::constant(0.0))).unwrap();
        assert!(matches!(solve_closed_form(&short, &grid), Err(crate::Error::AssumptionViolated(_))));
        let equal = ContestSpec::new(pv(&[0.5, 0.5, 0.0]), sep(2.0, ScalarFn::constant(0.0))).unwrap();
        assert!(solve_closed_form(&equal, &grid).is_err());
        assert!(!closed_form_candidate(&equal, &grid).unwrap().unique);
    }

    #[test]
    fn icx_desk_instance() {
        let grid = Arc::new(Grid::uniform(201).unwrap());
        let cost = sep(2.0, ScalarFn::constant(0.0));
        let v = ContestSpec::new(pv(&[0.5, 0.5, 0.0]), cost.clone()).unwrap();
        let w = ContestSpec::new(pv(&[1.0, 0.0, 0.0]), cost).unwrap();
        let check = icx_theorem_check(&v, &w, &grid, 1e-6).unwrap();
        assert!(check.holds(), "{:?} {:?}", check.quantile_order, check.icx);
        assert_eq!(check.sign_changes, 1);
        assert!(check.quantile_error_v < 1e-9 && check.quantile_error_w < 1e-9);
        assert!((check.mean_gamma_x - 1.0 / 3.0).abs() < 1e-8, "{}", check.mean_gamma_x);
        assert!((check.mean_gamma_y - 1.0 / 3.0).abs() < 1e-8, "{}", check.mean_gamma_y);
        let same = icx_theorem_check(&w, &w, &grid, 1e-9).unwrap();
        assert_eq!(same.quantile_order.relation, crate::gridmeasure::Relation::Equal);
        assert!(icx_theorem_check(&w, &v, &grid, 1e-9).is_err());
    }

    #[test]
    fn entry_quantile_examples() {
        let k: CostModel<f64> = CostModel::local(BivariateFn::Sum { x: ScalarFn::linear(1.0), q: ScalarFn::constant(0.0) });
        assert!((entry_quantile(&k, 3, 0.5).unwrap() - 0.25).abs() < 1e-11);
        assert_eq!(entry_quantile(&k, 3, 0.0).unwrap(), 0.0);
        assert!((entry_quantile(&k, 4, 1.0).unwrap() - 1.0).abs() < 1e-11);
        let weak = CostModel::local(BivariateFn::Sum { x: ScalarFn::linear(0.5), q: ScalarFn::constant(0.0) });
        assert!(entry_quantile(&weak, 2, 0.9).is_err());
    }

    #[test]
    fn entry_sweep_identity_kernel() {
        let grid: Arc<Grid<f64>> = Arc::new(Grid::uniform(101).unwrap());
        let k: CostModel<f64> = CostModel::local(BivariateFn::Sum { x: ScalarFn::linear(1.0), q: ScalarFn::constant(0.0) });
        let sweep = entry_sweep(&k, &[2, 3, 4], &grid, 1e-8).unwrap();
        for (d, n) in sweep.distributions.iter().zip([2, 3, 4]) {
            for (x, c) in grid.points().iter().zip(d.cdf()) {
                assert!((c - x.powf(1.0 / (n as f64 - 1.0))).abs() < 1e-6);
            }
        }
        assert!(sweep.verdicts.iter().all(|v| v.weakly_dominates()));
        assert!(entry_sweep(&k, &[2], &grid, 1e-8).unwrap().verdicts.is_empty());
        assert!(entry_sweep(&k, &[3, 2], &grid, 1e-8).is_err());
    }
}
