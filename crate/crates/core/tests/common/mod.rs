#![allow(dead_code)]

use std::sync::Arc;

use distcomp::gridmeasure::{Grid, GridDistribution, PrizeVector};
use proptest::prelude::*;

pub fn grid(m: usize) -> Arc<Grid<f64>> {
    Arc::new(Grid::uniform(m).unwrap())
}

/// Random laws on a uniform grid, roughly half of the points carrying mass.
pub fn dist(m: usize) -> impl Strategy<Value = GridDistribution<f64>> {
    prop::collection::vec((0.0f64..1.0, prop::bool::ANY), m).prop_filter_map("no mass", move |raw| {
        let w: Vec<f64> = raw.iter().map(|(v, keep)| if *keep { *v } else { 0.0 }).collect();
        let total: f64 = w.iter().sum();
        (total > 1e-3).then(|| GridDistribution::new(grid(m), w.iter().map(|v| v / total).collect()).unwrap())
    })
}

pub fn prizes(n: usize) -> impl Strategy<Value = PrizeVector<f64>> {
    prop::collection::vec(0.0f64..1.0, n - 1).prop_filter_map("degenerate", |mut v| {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v.push(0.0);
        let total: f64 = v.iter().sum();
        (total > 1e-3).then(|| PrizeVector::new(v.iter().map(|x| x / total).collect()).unwrap())
    })
}
