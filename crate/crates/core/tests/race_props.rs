mod common;

use common::dist;
use distcomp::costfun::CostModel;
use distcomp::funcs::{BivariateFn, ScalarFn};
use distcomp::race::*;
use proptest::prelude::*;

const M: usize = 41;

fn spec(n: usize, quality: bool) -> RaceSpec<f64> {
    let kappa = BivariateFn::Product {
        x: ScalarFn::ExpDecay { a: 1.0, rate: 2.0 },
        q: ScalarFn::Affine { a: 1.2, b: 0.3 },
        offset: 0.05,
    };
    let mode = if quality {
        RaceMode::Quality { m: 0.8, demand: ScalarFn::Power { a: 1.0, p: 0.5 } }
    } else {
        RaceMode::Rd { r: 1.0 }
    };
    RaceSpec::new(n, mode, CostModel::tail_local(kappa, 0.05), common::grid(M)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn v_tilde_sits_below_the_leading_term(h in dist(M), n in 2usize..6, quality in any::<bool>()) {
        let spec = spec(n, quality);
        let vt = v_tilde_all(&spec, &h);
        let cdf = h.cdf();
        for (k, t) in spec.grid.t_points.iter().enumerate() {
            // P(all rivals later than t_k) is F(x_{k−1})^{n−1} in x-coordinates
            let later = if k == 0 { 0.0 } else { cdf[k - 1].powi(n as i32 - 1) };
            let lead = spec.value(*t) * later;
            prop_assert!(vt[k] >= -1e-14);
            prop_assert!(vt[k] <= lead + 1e-12, "k {k}: Ṽ {} above {lead}", vt[k]);
            prop_assert!(lead <= spec.prize_bound() + 1e-14);
        }
    }

    #[test]
    fn aggregate_splits_into_its_three_terms(f in dist(M), n in 2usize..6, quality in any::<bool>()) {
        let spec = spec(n, quality);
        for t in spec.grid.t_points.clone() {
            let err = aggregate_decomposition_check(&spec, &f, t).unwrap();
            prop_assert!(err <= 1e-10, "t {t}: {err}");
        }
    }

    #[test]
    fn grid_times_round_trip(k in 0usize..M) {
        let tg = spec(2, false).grid;
        prop_assert_eq!(tg.index_of(tg.t_points[k]).unwrap(), k);
        let x = tg.x_grid.points()[k];
        if k > 0 {
            prop_assert!((1.0 / (1.0 + tg.t_points[k]) - x).abs() < 1e-12);
        }
    }
}
