//! Batch front end: JSON experiment configs in, CSV/JSON artifacts and a manifest out.
//!
//! Exit codes: 0 success, 1 invalid input or violated assumption, 2 a solve or check that ran
//! but did not certify (artifacts are still written).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use distcomp::SolverConfig64;
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub mod artifacts;
mod commands;

pub use artifacts::{replay_check, ReplayReport, RunManifest};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_GRID: usize = 201;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_UNCERTIFIED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SolveContest,
    ComparePrizes,
    EntrySweep,
    SolveRace,
    SolveQuality,
    SolveMarket,
    MarketLimitSweep,
    VerifyKkt,
    ValidateCost,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub command: Command,
    /// Command-specific fields; see the README for each layout.
    pub spec: Value,
    #[serde(default)]
    pub solver: SolverConfig64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Number of uniform grid points on [0, 1].
    #[serde(default = "default_grid")]
    pub grid: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Core(distcomp::Error),
    Config(String),
    Io(String),
    Internal(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Config(_) => "InvalidInput",
            CliError::Io(_) => "Io",
            CliError::Internal(_) => "Internal",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(distcomp::Error::NoConvergence { .. } | distcomp::Error::NumericalFailure(_)) => EXIT_UNCERTIFIED,
            _ => EXIT_INVALID,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() })
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<distcomp::Error> for CliError {
    fn from(e: distcomp::Error) -> Self {
        CliError::Core(e)
    }
}

/// What a command produced: whether its certificates hold, and the verdict summary.
pub struct Outcome {
    pub certified: bool,
    pub verdict: Value,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub manifest: Option<PathBuf>,
    pub error: Option<CliError>,
}

fn resolve(mut cfg: ExperimentConfig, ov: &Overrides) -> (ExperimentConfig, PathBuf) {
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(m) = ov.grid {
        cfg.grid = m;
    }
    if let Some(out) = &ov.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.solver.seed = cfg.seed;
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    (cfg, out)
}

fn write_error(dir: &Path, err: &CliError) {
    let _ = fs::create_dir_all(dir);
    let text = serde_json::to_string_pretty(&err.to_json()).unwrap_or_default();
    let _ = fs::write(dir.join(artifacts::ERROR_FILE), text + "\n");
}

/// Runs one experiment. Errors are reported through the exit code and `error.json`.
pub fn run(cfg: ExperimentConfig, ov: &Overrides) -> RunResult {
    let fail = |dir: PathBuf, e: CliError| {
        write_error(&dir, &e);
        RunResult { exit_code: e.exit_code(), out_dir: dir, manifest: None, error: Some(e) }
    };
    let (cfg, out) = resolve(cfg, ov);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(ov.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => return fail(out, CliError::Internal(e.to_string())),
    };
    match pool.install(|| execute(&cfg, &out, pool.current_num_threads())) {
        Ok((code, manifest)) => RunResult { exit_code: code, out_dir: out, manifest: Some(manifest), error: None },
        Err(e) => fail(out, e),
    }
}

fn execute(cfg: &ExperimentConfig, out: &Path, threads: usize) -> Result<(i32, PathBuf), CliError> {
    let started = Instant::now();
    let stale = out.join(artifacts::MANIFEST);
    if stale.exists() {
        fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
    }
    let _ = fs::remove_file(out.join(artifacts::ERROR_FILE));
    let mut arts = artifacts::Artifacts::new(out)?;
    let echo = serde_json::to_value(cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    let echo_bytes = arts.config_echo(&echo)?;
    cfg.solver.check()?;
    info!("running {:?} on a {}-point grid with {threads} threads", cfg.command, cfg.grid);
    let outcome = commands::dispatch(cfg, &mut arts)?;
    let exit_code = if outcome.certified { EXIT_OK } else { EXIT_UNCERTIFIED };
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        command: cfg.command,
        config: echo,
        input_hash: artifacts::blob_hash(&echo_bytes),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        threads,
        exit_code,
        artifacts: arts.entries().to_vec(),
        verdict: outcome.verdict,
    };
    let path = arts.finish(&manifest)?;
    Ok((exit_code, path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliCommand {
    SolveContest,
    ComparePrizes,
    EntrySweep,
    SolveRace,
    SolveQuality,
    SolveMarket,
    MarketLimitSweep,
    VerifyKkt,
    ValidateCost,
    /// Compare two run manifests: `replay-check A/manifest.json B/manifest.json`.
    ReplayCheck,
}

impl CliCommand {
    fn experiment(self) -> Option<Command> {
        Some(match self {
            CliCommand::SolveContest => Command::SolveContest,
            CliCommand::ComparePrizes => Command::ComparePrizes,
            CliCommand::EntrySweep => Command::EntrySweep,
            CliCommand::SolveRace => Command::SolveRace,
            CliCommand::SolveQuality => Command::SolveQuality,
            CliCommand::SolveMarket => Command::SolveMarket,
            CliCommand::MarketLimitSweep => Command::MarketLimitSweep,
            CliCommand::VerifyKkt => Command::VerifyKkt,
            CliCommand::ValidateCost => Command::ValidateCost,
            CliCommand::ReplayCheck => return None,
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "distcomp", version, about = "Equilibria of distributional competition games")]
struct Args {
    command: CliCommand,
    /// Manifests to compare (replay-check only).
    manifests: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
}

fn report_error(err: &CliError) -> i32 {
    eprintln!("{}", serde_json::to_string(&err.to_json()).unwrap_or_default());
    err.exit_code()
}

/// Entry point shared by the binary and the tests; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let Some(command) = args.command.experiment() else {
        let [a, b] = args.manifests.as_slice() else {
            return report_error(&CliError::Config("replay-check takes exactly two manifest paths".into()));
        };
        return match replay_check(a, b) {
            Ok(r) => {
                println!("{}", serde_json::to_string_pretty(&r).unwrap_or_default());
                if r.identical {
                    EXIT_OK
                } else {
                    EXIT_UNCERTIFIED
                }
            }
            Err(e) => report_error(&e),
        };
    };
    let ov = Overrides { out: args.out, seed: args.seed, grid: args.grid, threads: args.threads };
    let Some(path) = args.config else {
        let e = CliError::Config("--config is required".into());
        if let Some(dir) = &ov.out {
            write_error(dir, &e);
        }
        return report_error(&e);
    };
    let cfg = match ExperimentConfig::load(&path) {
        Ok(c) if c.command != command => Err(CliError::Config(format!(
            "config is for {:?} but {command:?} was requested",
            c.command
        ))),
        other => other,
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            if let Some(dir) = &ov.out {
                write_error(dir, &e);
            }
            return report_error(&e);
        }
    };
    let result = run(cfg, &ov);
    if let Some(e) = &result.error {
        report_error(e);
    } else {
        eprintln!("wrote {}", result.out_dir.display());
    }
    result.exit_code
}
