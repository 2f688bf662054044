use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_distcomp"))
        .arg(command)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs");
    status.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes a modified copy of a shipped config.
fn variant(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut cfg = json(&configs().join(name));
    edit(&mut cfg);
    let path = dir.join(format!("variant_{name}"));
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn compare_prizes_desk_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("cmp");
    assert_eq!(run("compare-prizes", &configs().join("compare_prizes.json"), &out, &[]), 0);
    let verdict = json(&out.join("verdict.json"));
    assert_eq!(verdict["icx_dominates"], Value::Bool(true));
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,F_v,F_w"));
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn malformed_prizes_exit_one_with_error_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "solve_contest.json", |c| c["spec"]["prizes"] = serde_json::json!([1, 0.1, 0]));
    let out = tmp.path().join("bad");
    assert_eq!(run("solve-contest", &cfg, &out, &[]), 1);
    let err = json(&out.join("error.json"));
    assert_eq!(err["error"], "InvalidInput");
    assert!(err["message"].as_str().unwrap().contains("sum to 1"), "{err}");
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn unknown_fields_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let top = variant(tmp.path(), "solve_race.json", |c| c["colour"] = Value::from(1));
    assert_eq!(run("solve-race", &top, &tmp.path().join("a"), &[]), 1);
    let nested = variant(tmp.path(), "solve_market.json", |c| c["spec"]["colour"] = Value::from(1));
    assert_eq!(run("solve-market", &nested, &tmp.path().join("b"), &[]), 1);
    let solver = variant(tmp.path(), "solve_contest.json", |c| c["solver"] = serde_json::json!({"colour": 1}));
    assert_eq!(run("solve-contest", &solver, &tmp.path().join("c"), &[]), 1);
}

#[test]
fn race_desk_instance_writes_table_and_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("race");
    assert_eq!(run("solve-race", &configs().join("solve_race.json"), &out, &[]), 0);
    let csv = fs::read_to_string(out.join("race.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,F_eq,G_pl,phi_eq,phi_pl,v_tilde"));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["verdict"]["fosd"], Value::Bool(true));
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
    let race = manifest["artifacts"].as_array().unwrap().iter().find(|a| a["path"] == "race.csv").unwrap();
    assert_eq!(race["columns"].as_array().unwrap().len(), 6);
}

#[test]
fn non_convergence_exits_two_and_keeps_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "solve_contest.json", |c| c["solver"] = serde_json::json!({"max_iter": 3}));
    let out = tmp.path().join("slow");
    assert_eq!(run("solve-contest", &cfg, &out, &[]), 2);
    assert!(out.join("equilibrium.csv").exists());
    assert_eq!(json(&out.join("manifest.json"))["exit_code"], 2);
}

#[test]
fn failed_validation_names_the_assumption() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = variant(tmp.path(), "validate_cost.json", |c| c["spec"]["eta1"] = Value::from(5.0));
    let out = tmp.path().join("val");
    assert_eq!(run("validate-cost", &cfg, &out, &[]), 1);
    let err = json(&out.join("error.json"));
    assert_eq!(err["error"], "AssumptionViolated");
    assert!(err["message"].as_str().unwrap().contains("TopCost"));
    assert!(out.join("validation.json").exists());
}

#[test]
fn manifest_hashes_match_files_and_overrides_are_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("kkt");
    assert_eq!(run("solve-contest", &configs().join("solve_contest.json"), &out, &["--grid", "51", "--seed", "9"]), 0);
    let echo = json(&out.join("config.json"));
    assert_eq!(echo["grid"], 51);
    assert_eq!(echo["seed"], 9);
    assert_eq!(echo["solver"]["seed"], 9);
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"], echo);
    for a in manifest["artifacts"].as_array().unwrap() {
        let bytes = fs::read(out.join(a["path"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), distcomp_cli::artifacts::sha256_hex(&bytes));
    }
    assert!(!out.join(".manifest.json.tmp").exists());
}

#[test]
fn replay_distinguishes_seeds_only_where_they_matter() {
    let tmp = tempfile::tempdir().unwrap();
    let mc = configs().join("solve_contest_mc.json");
    let (a, b) = (tmp.path().join("mc0"), tmp.path().join("mc1"));
    run("solve-contest", &mc, &a, &["--seed", "0"]);
    run("solve-contest", &mc, &b, &["--seed", "1"]);
    let r = distcomp_cli::replay_check(&a.join("manifest.json"), &b.join("manifest.json")).unwrap();
    assert!(!r.identical);
    assert_eq!(r.first_difference.as_deref(), Some("equilibrium.csv"));

    let exact = configs().join("solve_contest.json");
    let (c, d) = (tmp.path().join("ex0"), tmp.path().join("ex1"));
    assert_eq!(run("solve-contest", &exact, &c, &["--seed", "0"]), 0);
    assert_eq!(run("solve-contest", &exact, &d, &["--seed", "5"]), 0);
    assert!(distcomp_cli::replay_check(&c.join("manifest.json"), &d.join("manifest.json")).unwrap().identical);

    let other = tmp.path().join("race");
    run("solve-race", &configs().join("solve_race.json"), &other, &[]);
    assert!(distcomp_cli::replay_check(&c.join("manifest.json"), &other.join("manifest.json")).is_err());

    let status = Command::new(env!("CARGO_BIN_EXE_distcomp"))
        .args(["replay-check"])
        .arg(a.join("manifest.json"))
        .arg(b.join("manifest.json"))
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stdout).contains("equilibrium.csv"));
}

#[test]
fn command_must_match_config() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run("solve-race", &configs().join("solve_contest.json"), &tmp.path().join("x"), &[]), 1);
}
