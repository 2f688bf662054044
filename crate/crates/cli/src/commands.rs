use std::sync::Arc;

use distcomp::contest::{closed_form_candidate, entry_sweep, icx_theorem_check, ContestSpec};
use distcomp::costfun::{validate, CostKind};
use distcomp::eqsolver::{kkt_residual_with, net_return, solve_symmetric_equilibrium, Mode, PrizeKind, PrizeSpec, RankOrderOracle};
use distcomp::funcs::ScalarFn;
use distcomp::gridmeasure::{levy_distance, Grid};
use distcomp::market::{limit_sweep, solve_market, MarketSpec, Taste, DEFAULT_P_MAX};
use distcomp::race::{race_table, solve_race, RaceMode, RaceSpec};
use distcomp::{CostModel64, Dist64, Prizes64};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::artifacts::{Artifacts, Cell};
use crate::{CliError, Command, ExperimentConfig, Outcome};

fn spec_of<T: DeserializeOwned>(cfg: &ExperimentConfig) -> Result<T, CliError> {
    serde_json::from_value(cfg.spec.clone()).map_err(|e| CliError::Config(format!("spec: {e}")))
}

fn grid(cfg: &ExperimentConfig) -> Result<Arc<Grid<f64>>, CliError> {
    Ok(Arc::new(Grid::uniform(cfg.grid)?))
}

fn value<T: serde::Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

pub(crate) fn dispatch(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::SolveContest => solve_contest(cfg, arts),
        Command::ComparePrizes => compare_prizes(cfg, arts),
        Command::EntrySweep => entry(cfg, arts),
        Command::SolveRace => {
            let s: RdConfig = spec_of(cfg)?;
            let common = RaceCommon { eta1: s.eta1, validation_trials: s.validation_trials, planner_restarts: s.planner_restarts };
            race(cfg, arts, s.n, RaceMode::Rd { r: s.r }, s.cost, common)
        }
        Command::SolveQuality => {
            let s: QualityConfig = spec_of(cfg)?;
            let common = RaceCommon { eta1: s.eta1, validation_trials: s.validation_trials, planner_restarts: s.planner_restarts };
            race(cfg, arts, s.n, RaceMode::Quality { m: s.m, demand: s.demand }, s.cost, common)
        }
        Command::SolveMarket => market(cfg, arts),
        Command::MarketLimitSweep => market_sweep(cfg, arts),
        Command::VerifyKkt => verify_kkt(cfg, arts),
        Command::ValidateCost => validate_cost(cfg, arts),
    }
}

// ---- contests ------------------------------------------------------------------------------

/// How interim prizes are computed.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PrizeModelConfig {
    #[default]
    Exact,
    /// Rank-order payoffs estimated by simulation; the run seed drives the draws.
    MonteCarloRankOrder { samples: usize, max_standard_error: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContestConfig {
    prizes: Prizes64,
    cost: CostModel64,
    #[serde(default)]
    prize_model: PrizeModelConfig,
}

fn solve_contest(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s: ContestConfig = spec_of(cfg)?;
    let grid = grid(cfg)?;
    let spec = ContestSpec::new(s.prizes.clone(), s.cost.clone())?;
    let kind = match s.prize_model {
        PrizeModelConfig::Exact => PrizeKind::RankOrder(s.prizes.clone()),
        PrizeModelConfig::MonteCarloRankOrder { samples, max_standard_error } => PrizeKind::Custom {
            oracle: Arc::new(RankOrderOracle(s.prizes.clone())),
            samples,
            seed: cfg.seed,
            max_standard_error,
        },
    };
    let prize = PrizeSpec::new(spec.n, kind, grid.clone())?;
    let sol = solve_symmetric_equilibrium(&prize, &s.cost, &cfg.solver)?;
    let closed = match s.cost.kind {
        CostKind::Separable { .. } => closed_form_candidate(&spec, &grid).ok(),
        _ => None,
    };
    let f = &sol.distribution;
    let cdf = f.cdf();
    let closed_cdf = closed.as_ref().map(|c| c.distribution.cdf());
    let rows: Vec<Vec<Cell>> = (0..f.len())
        .map(|k| vec![f.points()[k].into(), f.weights()[k].into(), cdf[k].into(), closed_cdf.as_ref().map(|c| c[k]).into()])
        .collect();
    arts.csv("equilibrium.csv", &["x", "weight", "cdf", "cdf_closed_form"], &rows)?;
    let closed_json = closed.as_ref().map(|c| {
        json!({
            "lambda": c.lambda,
            "support_upper": c.support_upper,
            "unique": c.unique,
            "levy_distance": levy_distance(f, &c.distribution),
        })
    });
    let verdict = json!({
        "converged": sol.kkt.converged,
        "lambda": sol.kkt.lambda,
        "sup_violation": sol.kkt.sup_violation,
        "max_interior_atom": f.max_interior_atom(),
        "closed_form": closed_json,
    });
    arts.json("summary.json", &json!({ "kkt": value(&sol.kkt)?, "verdict": verdict }))?;
    Ok(Outcome { certified: sol.kkt.converged, verdict })
}

fn default_order_tol() -> f64 {
    1e-6
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareConfig {
    #[serde(default)]
    n: Option<usize>,
    v: Prizes64,
    w: Prizes64,
    cost: CostModel64,
    #[serde(default = "default_order_tol")]
    tol: f64,
}

fn compare_prizes(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s: CompareConfig = spec_of(cfg)?;
    if let Some(n) = s.n {
        if s.v.n() != n || s.w.n() != n {
            return Err(CliError::Config(format!("prize vectors must have n = {n} entries")));
        }
    }
    let grid = grid(cfg)?;
    let check = icx_theorem_check(&ContestSpec::new(s.v, s.cost.clone())?, &ContestSpec::new(s.w, s.cost)?, &grid, s.tol)?;
    let (fv, fw) = (check.x.distribution.cdf(), check.y.distribution.cdf());
    let rows: Vec<Vec<Cell>> = grid.points().iter().enumerate().map(|(k, x)| vec![(*x).into(), fv[k].into(), fw[k].into()]).collect();
    arts.csv("compare.csv", &["x", "F_v", "F_w"], &rows)?;
    let verdict = json!({
        "icx_dominates": check.holds(),
        "quantile_order": value(&check.quantile_order.relation)?,
        "icx": value(&check.icx.relation)?,
        "mean_gamma_x": check.mean_gamma_x,
        "mean_gamma_y": check.mean_gamma_y,
        "mean_expected": check.mean_expected,
        "sign_changes": check.sign_changes,
        "crossing": check.crossing,
        "unique": check.x.unique && check.y.unique,
    });
    arts.json("verdict.json", &verdict)?;
    Ok(Outcome { certified: true, verdict })
}

fn default_entry_tol() -> f64 {
    1e-8
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryConfig {
    cost: CostModel64,
    n_list: Vec<usize>,
    #[serde(default = "default_entry_tol")]
    tol: f64,
}

fn entry(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s: EntryConfig = spec_of(cfg)?;
    let grid = grid(cfg)?;
    let sweep = entry_sweep(&s.cost, &s.n_list, &grid, s.tol)?;
    let names: Vec<String> = std::iter::once("x".to_string()).chain(s.n_list.iter().map(|n| format!("F_n{n}"))).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let cdfs: Vec<Vec<f64>> = sweep.distributions.iter().map(Dist64::cdf).collect();
    let rows: Vec<Vec<Cell>> = grid
        .points()
        .iter()
        .enumerate()
        .map(|(k, x)| std::iter::once(Cell::from(*x)).chain(cdfs.iter().map(|c| c[k].into())).collect())
        .collect();
    arts.csv("entry.csv", &header, &rows)?;
    let holds = sweep.verdicts.iter().all(|v| v.weakly_dominates());
    let verdict = json!({
        "n_list": s.n_list,
        "fosd_consecutive": sweep.verdicts.iter().map(|v| v.weakly_dominates()).collect::<Vec<_>>(),
        "entry_lowers_output": holds,
    });
    arts.json("verdict.json", &json!({ "verdict": verdict, "verdicts": value(&sweep.verdicts)? }))?;
    Ok(Outcome { certified: true, verdict })
}

// ---- races ---------------------------------------------------------------------------------

fn default_race_eta1() -> f64 {
    0.1
}

fn default_trials() -> usize {
    8
}

fn default_one() -> usize {
    1
}

struct RaceCommon {
    eta1: f64,
    validation_trials: usize,
    planner_restarts: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RdConfig {
    n: usize,
    r: f64,
    cost: CostModel64,
    #[serde(default = "default_race_eta1")]
    eta1: f64,
    #[serde(default = "default_trials")]
    validation_trials: usize,
    #[serde(default = "default_one")]
    planner_restarts: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct QualityConfig {
    n: usize,
    m: f64,
    demand: ScalarFn<f64>,
    cost: CostModel64,
    #[serde(default = "default_race_eta1")]
    eta1: f64,
    #[serde(default = "default_trials")]
    validation_trials: usize,
    #[serde(default = "default_one")]
    planner_restarts: usize,
}

fn race(
    cfg: &ExperimentConfig,
    arts: &mut Artifacts,
    n: usize,
    mode: RaceMode<f64>,
    cost: CostModel64,
    common: RaceCommon,
) -> Result<Outcome, CliError> {
    let mut spec = RaceSpec::new(n, mode, cost, grid(cfg)?)?;
    spec.eta1 = common.eta1;
    spec.validation_trials = common.validation_trials;
    spec.planner_restarts = common.planner_restarts;
    let sol = solve_race(&spec, &cfg.solver)?;
    let rows: Vec<Vec<Cell>> = race_table(&spec, &sol)
        .iter()
        .map(|r| vec![r.t.into(), r.f_eq.into(), r.g_pl.into(), r.phi_eq.into(), r.phi_pl.into(), r.v_tilde.into()])
        .collect();
    arts.csv("race.csv", &["t", "F_eq", "G_pl", "phi_eq", "phi_pl", "v_tilde"], &rows)?;
    let verdict = json!({
        "converged": sol.converged(),
        "fosd": sol.fosd.weakly_dominates(),
        "fosd_shortfall": sol.fosd_shortfall,
        "lambda_g": sol.lambda_g,
        "lambda_p": sol.lambda_p,
        "lambda_p_bar": sol.lambda_p_bar,
        "c_inf": sol.c_inf,
        "pinning_g": sol.pinning_g,
        "pinning_p": sol.pinning_p,
        "planner_objective": sol.planner_objective,
    });
    arts.json(
        "summary.json",
        &json!({ "verdict": verdict, "eq_kkt": value(&sol.eq_kkt)?, "pl_kkt": value(&sol.pl_kkt)?, "fosd": value(&sol.fosd)? }),
    )?;
    Ok(Outcome { certified: sol.converged(), verdict })
}

// ---- markets -------------------------------------------------------------------------------

fn default_p_max() -> f64 {
    DEFAULT_P_MAX
}

fn default_market_eta1() -> f64 {
    0.05
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarketConfig {
    /// Firms; the sweep uses `n_list` instead.
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    n_list: Option<Vec<usize>>,
    sigma: f64,
    #[serde(default = "Taste::uniform")]
    taste: Taste<f64>,
    cost: CostModel64,
    #[serde(default = "default_p_max")]
    p_max: f64,
    #[serde(default = "default_market_eta1")]
    eta1: f64,
    #[serde(default = "default_trials")]
    validation_trials: usize,
}

impl MarketConfig {
    fn spec(self, n: usize, grid: Arc<Grid<f64>>) -> Result<MarketSpec<f64>, CliError> {
        let mut spec = MarketSpec::new(n, self.sigma, self.taste, self.cost, grid)?;
        spec.p_max = self.p_max;
        spec.eta1 = self.eta1;
        spec.validation_trials = self.validation_trials;
        Ok(spec)
    }
}

fn market(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s: MarketConfig = spec_of(cfg)?;
    if s.n_list.is_some() {
        return Err(CliError::Config("spec: n_list belongs to market-limit-sweep".into()));
    }
    let n = s.n.ok_or_else(|| CliError::Config("spec: missing field `n`".into()))?;
    let spec = s.spec(n, grid(cfg)?)?;
    let eq = solve_market(&spec, &cfg.solver)?;
    let f = &eq.distribution;
    let cdf = f.cdf();
    let rows: Vec<Vec<Cell>> = (0..f.len()).map(|k| vec![f.points()[k].into(), f.weights()[k].into(), cdf[k].into()]).collect();
    arts.csv("quality.csv", &["q", "weight", "cdf"], &rows)?;
    let sm = &eq.smoothed;
    let rows: Vec<Vec<Cell>> =
        (0..sm.z.len()).map(|j| vec![sm.z[j].into(), sm.f_hat_cdf[j].into(), sm.f_hat_density[j].into()]).collect();
    arts.csv("f_hat.csv", &["z", "F_hat", "f_hat"], &rows)?;
    let verdict = json!({
        "converged": eq.converged,
        "p": eq.p,
        "lambda_g": eq.lambda_g,
        "foc_residual": eq.foc_residual,
        "support_span": [eq.support_span.0, eq.support_span.1],
        "cost_gap": eq.cost_gap,
        "omega_gap": eq.omega_gap,
        "gap_identity_residual": (eq.cost_gap - eq.p * eq.omega_gap).abs(),
        "price_dev_gap": eq.price_dev_gap,
        "win_mass": eq.win_mass,
        "outer_iterations": eq.outer_iterations,
    });
    arts.json("summary.json", &json!({ "verdict": verdict, "kkt": value(&eq.kkt)?, "equilibrium": value(&eq)? }))?;
    Ok(Outcome { certified: eq.converged, verdict })
}

fn market_sweep(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let mut s: MarketConfig = spec_of(cfg)?;
    if s.n.is_some() {
        return Err(CliError::Config("spec: use n_list, not n, for market-limit-sweep".into()));
    }
    let n_list = s.n_list.take().ok_or_else(|| CliError::Config("spec: missing field `n_list`".into()))?;
    let first = *n_list.first().ok_or_else(|| CliError::Config("spec: n_list is empty".into()))?;
    let base = s.spec(first.max(2), grid(cfg)?)?;
    let table = limit_sweep(&base, &n_list, &cfg.solver)?;
    let rows: Vec<Vec<Cell>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.n.into(),
                r.p.into(),
                r.lambda_g.into(),
                r.cost_gap.into(),
                r.q_lo.into(),
                r.q_hi.into(),
                r.kkt_sup.into(),
                r.price_dev_gap.into(),
            ]
        })
        .collect();
    arts.csv("limit.csv", &["n", "p", "lambda_g", "cost_gap", "q_lo", "q_hi", "kkt_sup", "price_dev_gap"], &rows)?;
    let converged = table.rows.iter().all(|r| r.converged);
    let verdict = json!({
        "converged": converged,
        "prices_decreasing": table.prices_decreasing,
        "gap_bound": table.rows.iter().all(|r| r.gap_bound),
        "steepness_bound": table.rows.iter().map(|r| r.steepness_bound).collect::<Vec<_>>(),
    });
    arts.json("summary.json", &json!({ "verdict": verdict, "table": value(&table)? }))?;
    Ok(Outcome { certified: converged, verdict })
}

// ---- checks --------------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct KktConfig {
    prizes: Prizes64,
    cost: CostModel64,
    /// {grid, weights}; the grid here takes precedence over the run's grid size.
    distribution: Dist64,
    #[serde(default = "default_mode")]
    mode: Mode,
}

fn default_mode() -> Mode {
    Mode::Game
}

fn verify_kkt(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s: KktConfig = spec_of(cfg)?;
    let f = s.distribution;
    let prize = PrizeSpec::rank_order(s.prizes, f.grid().clone())?;
    let report = kkt_residual_with(&prize, &f, &s.cost, s.mode, &cfg.solver)?;
    let phi = net_return(&prize, &s.cost, f.weights(), s.mode)?;
    let rows: Vec<Vec<Cell>> = (0..f.len()).map(|k| vec![f.points()[k].into(), f.weights()[k].into(), phi[k].into()]).collect();
    arts.csv("phi.csv", &["x", "weight", "phi"], &rows)?;
    arts.json("kkt.json", &report)?;
    let verdict = json!({
        "satisfied": report.converged,
        "lambda": report.lambda,
        "sup_violation": report.sup_violation,
        "comp_gap": report.comp_gap,
    });
    Ok(Outcome { certified: report.converged, verdict })
}

fn default_validation_trials() -> usize {
    20
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateConfig {
    cost: CostModel64,
    pi_bar: f64,
    eta1: f64,
    #[serde(default = "default_validation_trials")]
    trials: usize,
}

fn validate_cost(cfg: &ExperimentConfig, arts: &mut Artifacts) -> Result<Outcome, CliError> {
    let s: ValidateConfig = spec_of(cfg)?;
    let report = validate(&s.cost, s.pi_bar, s.eta1, s.trials, cfg.seed, &grid(cfg)?)?;
    arts.json("validation.json", &report)?;
    if let Some(v) = report.first_violation() {
        return Err(distcomp::Error::AssumptionViolated(format!("{:?}: {}", v.assumption, v.detail)).into());
    }
    let verdict = json!({ "passed": true, "trials": report.trials, "c3_margin": report.report.c3_margin });
    Ok(Outcome { certified: true, verdict })
}
