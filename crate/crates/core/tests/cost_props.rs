mod common;

use common::dist;
use distcomp::costfun::*;
use distcomp::funcs::{BivariateFn, ScalarFn};
use proptest::prelude::*;

// Kernels whose q-slope does not fall with x, so s ↦ C((1−s)F + sG) is convex on every segment.
fn models() -> Vec<CostModel<f64>> {
    vec![
        CostModel::linear(ScalarFn::Power { a: 1.5, p: 2.0 }),
        CostModel::separable(ScalarFn::linear(2.0), ScalarFn::linear(0.5)),
        CostModel::local(BivariateFn::Sum { x: ScalarFn::Affine { a: 0.1, b: 1.0 }, q: ScalarFn::linear(0.8) }),
        CostModel::tail_local(
            BivariateFn::Product { x: ScalarFn::ExpDecay { a: 1.0, rate: 2.0 }, q: ScalarFn::Affine { a: 1.2, b: 0.3 }, offset: 0.05 },
            0.05,
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn slope_test_and_convexity(f in dist(21), g in dist(21)) {
        for model in models() {
            let check = gateaux_check(&model, &f, &g, &[1e-2, 1e-3, 1e-4], DifferenceReference::BasePoint).unwrap();
            prop_assert!(check.passed(), "{:?}: slope {}", model.kind, check.slope);
            let excess = midpoint_convexity_excess(&model, &f, &g).unwrap();
            prop_assert!(excess <= 1e-8, "{:?}: excess {}", model.kind, excess);
        }
    }

    #[test]
    fn segment_difference_is_antisymmetric(f in dist(21), g in dist(21)) {
        for model in models() {
            let there = evaluate(&model, &g, &f).unwrap();
            let back = evaluate(&model, &f, &g).unwrap();
            prop_assert!((there + back).abs() < 1e-9);
        }
    }
}

#[test]
fn linear_cost_is_path_independent() {
    let grid = common::grid(21);
    let model = CostModel::linear(ScalarFn::Power { a: 1.0, p: 1.5 });
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
    let d = |rng: &mut rand_chacha::ChaCha8Rng| distcomp::gridmeasure::sample_distribution(&grid, rng);
    let (a, b, c) = (d(&mut rng), d(&mut rng), d(&mut rng));
    let direct = evaluate(&model, &c, &a).unwrap();
    let via = evaluate(&model, &b, &a).unwrap() + evaluate(&model, &c, &b).unwrap();
    assert!((direct - via).abs() < 1e-7);
}

// A convex β makes the kernel's q-slope rise along the support, and the segment cost can then bend down.
#[test]
fn convex_beta_can_bend_a_segment_down() {
    let grid = common::grid(21);
    let model = CostModel::separable(ScalarFn::linear(2.0), ScalarFn::Power { a: 0.5, p: 2.0 });
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
    let worst = (0..200)
        .map(|_| {
            let f = distcomp::gridmeasure::sample_distribution(&grid, &mut rng);
            let g = distcomp::gridmeasure::sample_distribution(&grid, &mut rng);
            midpoint_convexity_excess(&model, &f, &g).unwrap()
        })
        .fold(f64::MIN, f64::max);
    assert!(worst > 1e-8, "worst excess {worst}");
}
