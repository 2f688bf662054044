//! Symmetric equilibria and planner solutions of games where players choose outcome
//! distributions on [0, 1] at a distributional cost.
//!
//! Everything is generic over the scalar (`f64` or `f32`); the aliases below fix it to `f64`
//! unless marked otherwise.

pub mod contest;
pub mod costfun;
pub mod eqsolver;
pub mod error;
pub mod funcs;
pub mod gridmeasure;
pub mod market;
pub mod quad;
pub mod race;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Grid64 = gridmeasure::Grid<f64>;
pub type Grid32 = gridmeasure::Grid<f32>;
pub type Dist64 = gridmeasure::GridDistribution<f64>;
pub type Dist32 = gridmeasure::GridDistribution<f32>;
pub type Prizes64 = gridmeasure::PrizeVector<f64>;
pub type CostModel64 = costfun::CostModel<f64>;
pub type CostModel32 = costfun::CostModel<f32>;
pub type PrizeSpec64 = eqsolver::PrizeSpec<f64>;
pub type PrizeSpec32 = eqsolver::PrizeSpec<f32>;
pub type SolverConfig64 = eqsolver::SolverConfig<f64>;
pub type SolverConfig32 = eqsolver::SolverConfig<f32>;
pub type ContestSpec64 = contest::ContestSpec<f64>;
pub type RaceSpec64 = race::RaceSpec<f64>;
pub type MarketSpec64 = market::MarketSpec<f64>;
