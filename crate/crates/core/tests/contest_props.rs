mod common;

use common::{grid, prizes};
use distcomp::contest::*;
use distcomp::costfun::CostModel;
use distcomp::eqsolver::{kkt_residual, solve_symmetric_equilibrium, Mode, PrizeSpec, SolverConfig};
use distcomp::funcs::{BivariateFn, ScalarFn};
use distcomp::gridmeasure::{apply_transfers, levy_distance, PrizeVector, Transfer};
use proptest::prelude::*;

fn cost() -> CostModel<f64> {
    CostModel::separable(ScalarFn::linear(2.0), ScalarFn::constant(0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn psi_integrates_to_one_over_n(n in 2usize..7, seed in 0u64..1000) {
        let v = proptest::strategy::ValueTree::current(
            &prizes(n).new_tree(&mut proptest::test_runner::TestRunner::new_with_rng(
                Default::default(),
                proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &[seed as u8; 32]),
            )).unwrap(),
        );
        prop_assert!((psi_mean_check(&v, 101).unwrap() - 1.0 / n as f64).abs() < 1e-8);
    }

    #[test]
    fn reverse_transfer_crosses_once(v in prizes(4), i in 0usize..3, frac in 0.05f64..0.95) {
        // move mass from a lower rank j > i up to rank i, keeping the order
        let s = v.as_slice();
        let j = i + 1;
        prop_assume!(j < 3);
        let above = if i == 0 { f64::INFINITY } else { s[i - 1] - s[i] };
        let room = above.min(s[j] - s[j + 1]);
        prop_assume!(room > 1e-6);
        let delta = frac * room;
        let raised = apply_transfers(s, &[Transfer { i, j, delta }]);
        let w = PrizeVector::new(raised).unwrap();
        let a = ContestSpec::new(v.clone(), cost()).unwrap();
        let b = ContestSpec::new(w.clone(), cost()).unwrap();
        let qs: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
        let d: Vec<f64> = qs.iter().map(|q| b.g(*q).unwrap() - a.g(*q).unwrap()).collect();
        let signs: Vec<bool> = d.iter().filter(|x| x.abs() > 1e-12).map(|x| *x > 0.0).collect();
        let changes = signs.windows(2).filter(|p| p[0] != p[1]).count();
        prop_assert_eq!(changes, 1);
        prop_assert!(!signs[0] && *signs.last().unwrap());
        let mean = psi_mean_check(&w, 101).unwrap() - psi_mean_check(&v, 101).unwrap();
        prop_assert!(mean.abs() < 1e-8);
    }

    #[test]
    fn entry_quantile_falls_with_n(q in 0.0f64..1.0, n in 2usize..8) {
        let k = CostModel::local(BivariateFn::Product { x: ScalarFn::linear(1.0), q: ScalarFn::Affine { a: 1.0, b: 1.0 }, offset: 0.0 });
        prop_assert!(entry_quantile(&k, n + 1, q).unwrap() <= entry_quantile(&k, n, q).unwrap() + 1e-12);
    }
}

#[test]
fn closed_form_passes_kkt_with_shrinking_residual() {
    let spec = ContestSpec::new(PrizeVector::winner_take_all(3).unwrap(), cost()).unwrap();
    let mut previous = f64::INFINITY;
    for m in [51, 101, 201, 401] {
        let g = grid(m);
        let eq = solve_closed_form(&spec, &g).unwrap();
        let r = kkt_residual(&PrizeSpec::rank_order(spec.v.clone(), g).unwrap(), &eq.distribution, &spec.cost, Mode::Game).unwrap();
        assert!(r.sup_violation * m as f64 <= 2.0, "M = {m}: {}", r.sup_violation);
        println!("M = {m}: sup {:.3e} λ {:.3e}", r.sup_violation, r.lambda);
        if m >= 201 {
            assert!(r.lambda.abs() <= 5e-3);
        }
        assert!(r.sup_violation <= previous + 1e-12);
        previous = r.sup_violation;
    }
}

#[test]
fn general_solver_agrees_with_closed_form_up_to_grid_resolution() {
    // the grid game ties at shared atoms, so agreement is at the scale of a cell
    for v in [vec![1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.7, 0.3, 0.0]] {
        let m = 101;
        let g = grid(m);
        let spec = ContestSpec::new(PrizeVector::new(v).unwrap(), cost()).unwrap();
        let eq = solve_closed_form(&spec, &g).unwrap();
        let sol = solve_symmetric_equilibrium(&PrizeSpec::rank_order(spec.v.clone(), g).unwrap(), &spec.cost, &SolverConfig::default()).unwrap();
        assert!(sol.kkt.converged);
        let d = levy_distance(&eq.distribution, &sol.distribution);
        assert!(d <= 1.5 / (m - 1) as f64, "{d}");
    }
}
