mod common;

use std::sync::Arc;

use common::{dist, grid, prizes};
use distcomp::costfun::{evaluate, CostModel};
use distcomp::eqsolver::*;
use distcomp::funcs::{BivariateFn, ScalarFn};
use distcomp::gridmeasure::{GridDistribution, PrizeVector};
use proptest::prelude::*;

/// Brute-force interim prize: enumerate opponent profiles on the support.
fn brute_interim(v: &[f64], f: &GridDistribution<f64>, k: usize) -> f64 {
    let n = v.len();
    let support: Vec<usize> = (0..f.len()).filter(|j| f.weights()[*j] > 0.0).collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; n - 1];
    loop {
        let prob: f64 = idx.iter().map(|i| f.weights()[support[*i]]).product();
        let above = idx.iter().filter(|i| support[**i] > k).count();
        let tied = idx.iter().filter(|i| support[**i] == k).count();
        let share: f64 = v[above..=above + tied].iter().sum::<f64>() / (tied + 1) as f64;
        total += prob * share;
        let mut p = 0;
        loop {
            if p == n - 1 {
                return total;
            }
            idx[p] += 1;
            if idx[p] < support.len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rank_interim_matches_enumeration(v in prizes(4), f in dist(9)) {
        let spec = PrizeSpec::rank_order(v.clone(), f.grid().clone()).unwrap();
        let a = interim_prize(&spec, &f).unwrap();
        for k in 0..9 {
            prop_assert!((a[k] - brute_interim(v.as_slice(), &f, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_prize_is_conserved(v in prizes(5), f in dist(21)) {
        let spec = PrizeSpec::rank_order(v, f.grid().clone()).unwrap();
        let a = interim_prize(&spec, &f).unwrap();
        let total: f64 = a.iter().zip(f.weights()).map(|(a, w)| a * w).sum();
        prop_assert!((5.0 * total - 1.0).abs() < 1e-12);
        prop_assert!(planner_gradient(&spec, &f).unwrap().iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn best_response_is_unbeaten_by_point_masses(f in dist(31)) {
        let spec = PrizeSpec::rank_order(PrizeVector::winner_take_all(3).unwrap(), f.grid().clone()).unwrap();
        let cost = CostModel::local(BivariateFn::Sum { x: ScalarFn::linear(0.7), q: ScalarFn::Power { a: 0.4, p: 2.0 } });
        let cfg = SolverConfig::default();
        let br = best_response(&spec, &f, &cost, &cfg).unwrap();
        let a = interim_prize(&spec, &f).unwrap();
        let h = &br.distribution;
        let value = |g: &GridDistribution<f64>| -> f64 {
            a.iter().zip(g.weights()).map(|(a, w)| a * w).sum::<f64>() - evaluate(&cost, g, h).unwrap()
        };
        let own = value(h);
        for k in 0..31 {
            let challenger = GridDistribution::point_mass(f.grid().clone(), k).unwrap();
            prop_assert!(value(&challenger) <= own + cfg.kkt_tol);
        }
    }

    #[test]
    fn kkt_report_invariants(v in prizes(3), f in dist(21)) {
        let spec = PrizeSpec::rank_order(v, f.grid().clone()).unwrap();
        let cost = CostModel::linear(ScalarFn::linear(1.5));
        let r = kkt_residual(&spec, &f, &cost, Mode::Game).unwrap();
        prop_assert!(r.comp_gap >= -1e-10);
        prop_assert!(r.comp_gap.abs() < 1e-12);
        let phi = net_return(&spec, &cost, f.weights(), Mode::Game).unwrap();
        let lambda: f64 = phi.iter().zip(f.weights()).map(|(p, w)| p * w).sum();
        prop_assert!((r.lambda - lambda).abs() < 1e-15);
    }
}

#[test]
fn winner_prizes_match_order_statistics() {
    let g = grid(11);
    let f = GridDistribution::uniform(g.clone());
    let race = PrizeSpec::new(3, PrizeKind::MaxQuality(ScalarFn::linear(1.0)), g.clone()).unwrap();
    let a = interim_prize(&race, &f).unwrap();
    // highest of three wins x; with 11 equally likely points and ties split
    for k in 0..11 {
        let (below, at) = (k as f64 / 11.0, 1.0 / 11.0);
        let win = below * below + below * at + at * at / 3.0;
        assert!((a[k] - g.points()[k] * win).abs() < 1e-14);
    }
    let big_a = planner_gradient(&race, &f).unwrap();
    // E[max(x, M)] where M is the max of two uniform draws
    let expect_top: f64 = (0..11).map(|j| g.points()[j] * (((j + 1) as f64).powi(2) - (j as f64).powi(2)) / 121.0).sum();
    assert!((big_a[0] - expect_top).abs() < 1e-14);
    assert!((big_a[10] - 1.0).abs() < 1e-14);
}

#[test]
fn planner_restarts_never_lower_the_objective() {
    let g = grid(41);
    let spec = PrizeSpec::new(2, PrizeKind::MaxQuality(ScalarFn::linear(1.0)), g).unwrap();
    let cost = CostModel::separable(ScalarFn::linear(0.8), ScalarFn::Power { a: 0.3, p: 2.0 });
    let cfg = SolverConfig { seed: 11, ..SolverConfig::default() };
    let one = solve_planner(&spec, &cost, &cfg, 1).unwrap();
    let many = solve_planner(&spec, &cost, &cfg, 8).unwrap();
    assert!(many.objective.unwrap() >= one.objective.unwrap() - 1e-12);
    assert!(solve_planner(&spec, &cost, &cfg, 0).is_err());
}

#[test]
fn equilibrium_respects_mean_constraint_and_reports_failure() {
    let g = grid(31);
    let spec = PrizeSpec::rank_order(PrizeVector::winner_take_all(2).unwrap(), g.clone()).unwrap();
    let cost = CostModel::linear(ScalarFn::linear(0.5));
    let cfg = SolverConfig { mean_constraint: Some(0.35), ..SolverConfig::default() };
    let sol = solve_symmetric_equilibrium(&spec, &cost, &cfg).unwrap();
    assert!((sol.distribution.mean() - 0.35).abs() < 1e-10);
    assert!(sol.kkt.converged);

    let starved = SolverConfig { max_iter: 2, kkt_tol: 1e-9, ..SolverConfig::default() };
    let sol = solve_symmetric_equilibrium(&spec, &CostModel::linear(ScalarFn::linear(2.0)), &starved).unwrap();
    assert!(!sol.kkt.converged);
    assert!(matches!(sol.require_converged(), Err(distcomp::Error::NoConvergence { .. })));
}

#[test]
fn f32_equilibrium_solve() {
    let g = Arc::new(distcomp::gridmeasure::Grid::<f32>::uniform(51).unwrap());
    let spec = PrizeSpec::rank_order(PrizeVector::winner_take_all(2).unwrap(), g.clone()).unwrap();
    let cfg = SolverConfig::<f32> { kkt_tol: 1e-2, ..SolverConfig::default() };
    let sol = solve_symmetric_equilibrium(&spec, &CostModel::linear(ScalarFn::linear(2.0)), &cfg).unwrap();
    assert!(sol.kkt.converged);
    let cdf = sol.distribution.cdf();
    for (x, c) in g.points().iter().zip(&cdf) {
        assert!((c - (2.0 * x).min(1.0)).abs() < 0.1);
    }
}
