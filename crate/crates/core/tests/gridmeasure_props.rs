mod common;

use common::{dist, grid, prizes};
use distcomp::gridmeasure::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cdf_is_monotone_and_ends_at_one(f in dist(31)) {
        let c = f.cdf();
        prop_assert!(c.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        prop_assert_eq!(c[30], 1.0);
    }

    #[test]
    fn quantile_inverts_cdf(f in dist(31), q in 0.001f64..1.0) {
        let x = f.quantile(q).unwrap();
        prop_assert!(f.cdf_at(x).unwrap() >= q - 1e-12);
        let k = f.grid().index_of(x).unwrap();
        if k > 0 {
            prop_assert!(f.cdf()[k - 1] < q);
        }
    }

    #[test]
    fn fosd_implies_icx(f in dist(21), g in dist(21)) {
        if fosd_compare(&f, &g, 0.0).unwrap().relation == Relation::Dominates {
            prop_assert!(icx_compare(&f, &g, 1e-12).unwrap().weakly_dominates());
        }
    }

    #[test]
    fn mixing_toward_a_point_mass_at_one_raises_fosd(f in dist(21), s in 0.05f64..1.0) {
        let top = GridDistribution::point_mass(grid(21), 20).unwrap();
        let mixed = f.mix(&top, s).unwrap();
        prop_assert!(fosd_compare(&mixed, &f, 1e-12).unwrap().weakly_dominates());
    }

    #[test]
    fn pigou_dalton_path_reaches_the_target(v in prizes(5)) {
        let w = PrizeVector::winner_take_all(5).unwrap();
        prop_assert!(majorizes(&w, &v).unwrap());
        let path = pigou_dalton_path(&v, &w).unwrap();
        let reached = apply_transfers(v.as_slice(), &path);
        for (a, b) in reached.iter().zip(w.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for t in &path {
            prop_assert!(t.i < t.j && t.delta > 0.0);
        }
    }

    #[test]
    fn levy_distance_is_a_metric(f in dist(15), g in dist(15), h in dist(15)) {
        let fg = levy_distance(&f, &g);
        prop_assert!((fg - levy_distance(&g, &f)).abs() < 1e-12);
        prop_assert!(levy_distance(&f, &f) < 1e-12);
        prop_assert!(fg <= levy_distance(&f, &h) + levy_distance(&h, &g) + 1e-9);
        prop_assert!(fg <= 1.0);
    }

    #[test]
    fn json_round_trip(f in dist(11)) {
        let back = GridDistribution::<f64>::from_json(&f.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.weights(), f.weights());
    }
}

#[test]
fn f32_distributions_work() {
    let g = std::sync::Arc::new(Grid::<f32>::uniform(11).unwrap());
    let f = GridDistribution::uniform(g.clone());
    assert!((f.mean() - 0.5).abs() < 1e-6);
    let top = GridDistribution::point_mass(g, 10).unwrap();
    assert_eq!(fosd_compare(&top, &f, 1e-6).unwrap().relation, Relation::Dominates);
}
