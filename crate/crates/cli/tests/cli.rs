use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ost_core::export::SolutionRecord;
use ost_core::{build_utility_matrix, builtin_use_case, LevelSpec, SafeguardSpec};

fn ost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ost"))
        .env_remove("OST_SEED")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_scenario(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn emit_prints_the_builtin_scenario() {
    assert_eq!(stdout(&ost(&["scenario", "emit"])), builtin_use_case().to_json());
}

#[test]
fn validate_lists_violations_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = builtin_use_case()
        .to_json()
        .replace("\"attack_probability\": 0.2", "\"attack_probability\": 1.3")
        .replace("\"budget\": 100.0", "\"budget\": -5.0");
    let path = write_scenario(dir.path(), &text);
    let o = ost(&["scenario", "validate", "--scenario", &path]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("probability-out-of-range"), "{err}");
    assert!(err.contains("negative-budget"), "{err}");
    assert!(err.contains("groups[0].attack_probability"), "{err}");

    let ok = ost(&["scenario", "validate"]);
    assert!(stdout(&ok).contains("valid"));
}

#[test]
fn invalid_scenario_stops_every_command_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = builtin_use_case().to_json().replacen("0.35", "1.0", 1);
    let path = write_scenario(dir.path(), &text);
    for cmd in ["solve", "invest", "simulate", "report"] {
        let o = ost(&[cmd, "--scenario", &path]);
        assert_eq!(o.status.code(), Some(2), "{cmd}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("efficacy"), "{cmd}");
    }
}

#[test]
fn unknown_flags_and_bad_values_are_rejected() {
    assert_eq!(ost(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(ost(&["invest", "--budget", "-1"]).status.code(), Some(2));
    assert_eq!(ost(&["simulate", "--runs", "0"]).status.code(), Some(2));
    assert_eq!(ost(&["simulate", "--game", "17.4"]).status.code(), Some(2));
    assert_eq!(ost(&["simulate", "--game", "17.4:9"]).status.code(), Some(2));
    assert_eq!(ost(&["simulate", "--game", "99:1"]).status.code(), Some(2));
    assert_eq!(
        ost(&["solve", "--scenario", "/nonexistent.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn solve_exports_eight_verified_records() {
    let s = builtin_use_case();
    let records: Vec<SolutionRecord> = serde_json::from_str(&stdout(&ost(&["solve"]))).unwrap();
    assert_eq!(records.len(), 8);
    for r in &records {
        r.verify(&s).unwrap();
        if r.lambda == 0 {
            assert_eq!(r.plan_cost, 0.0);
            assert_eq!(r.nsp, vec![1.0]);
        }
    }
    let csv = stdout(&ost(&["solve", "--format", "csv"]));
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("safeguard_id,lambda,value,plan_cost,nsp,attacker,efficacy_ict,"));
}

#[test]
fn invest_budget_zero_keeps_everything_at_level_zero() {
    let report: serde_json::Value = serde_json::from_str(&stdout(&ost(&["invest", "--budget", "0"]))).unwrap();
    assert_eq!(report["objective"], 65.0);
    assert_eq!(report["total_cost"], 0.0);
    assert_eq!(report["chosen_candidate_index"], 1);
    for p in report["portfolio"].as_array().unwrap() {
        assert_eq!(p["lambda"], 0);
    }
}

#[test]
fn invest_writes_report_and_frontier() {
    let dir = tempfile::tempdir().unwrap();
    for budget in ["40", "100"] {
        let o = ost(&["invest", "--budget", budget, "--out", dir.path().to_str().unwrap()]);
        assert!(o.status.success());
        let frontier = fs::read_to_string(dir.path().join("frontier.csv")).unwrap();
        let rows: Vec<&str> = frontier.lines().skip(1).collect();
        assert_eq!(rows.len(), 16);
        assert_eq!(rows.iter().filter(|r| r.ends_with(",true")).count(), 1);
        assert!(dir.path().join("investment.json").exists());
    }
}

#[test]
fn invest_needs_a_budget_from_somewhere() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_use_case();
    s.budget = None;
    let path = write_scenario(dir.path(), &s.to_json());
    assert_eq!(ost(&["invest", "--scenario", &path]).status.code(), Some(2));
    assert!(ost(&["invest", "--scenario", &path, "--budget", "10"]).status.success());
}

#[test]
fn dynamic_program_agrees_with_enumeration() {
    let ex: serde_json::Value = serde_json::from_str(&stdout(&ost(&["invest"]))).unwrap();
    let dp: serde_json::Value = serde_json::from_str(&stdout(&ost(&["invest", "--method", "dp"]))).unwrap();
    assert_eq!(ex["objective"], dp["objective"]);
    assert_eq!(dp["method"], "dp");
}

#[test]
fn too_many_portfolios_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_use_case();
    let template: SafeguardSpec = s.safeguards[1].clone();
    s.safeguards = (0..10)
        .map(|k| SafeguardSpec {
            id: format!("s{k}"),
            ..template.clone()
        })
        .collect();
    let path = write_scenario(dir.path(), &s.to_json());
    let o = ost(&["invest", "--scenario", &path]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--method dp"));
    let dp = ost(&["invest", "--scenario", &path, "--method", "dp"]);
    assert!(dp.status.success());
}

#[test]
fn simulate_produces_a_36_cell_table() {
    let csv = stdout(&ost(&["simulate", "--runs", "3", "--attacks", "50"]));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "game,defender,attacker,mean_utility,std_error,runs,attacks_per_run,seed"
    );
    assert_eq!(lines.count(), 36);
}

#[test]
fn single_attack_with_pure_policies_is_exact() {
    let s = builtin_use_case();
    let csv = stdout(&ost(&["simulate", "--runs", "1", "--attacks", "1", "--game", "17.4:3"]));
    let m = build_utility_matrix(&s, "17.4", 3).unwrap();
    // Under default parameters both NSS and NAS are point masses.
    let nash = csv.lines().find(|l| l.contains("NSS,NAS")).unwrap();
    assert_eq!(nash.rsplit(',').nth(4).unwrap(), m.get(0, 1).to_string());
    let cautious = csv.lines().find(|l| l.contains("CSS,NAS")).unwrap();
    assert_eq!(cautious.rsplit(',').nth(4).unwrap(), m.get(3, 1).to_string());
}

#[test]
fn seed_controls_simulation_and_env_overrides_flag() {
    let args = ["simulate", "--runs", "2", "--attacks", "100", "--seed", "7"];
    let a = stdout(&ost(&args));
    assert_eq!(a, stdout(&ost(&args)));
    assert_ne!(
        a,
        stdout(&ost(&["simulate", "--runs", "2", "--attacks", "100", "--seed", "8"]))
    );
    let with_env = Command::new(env!("CARGO_BIN_EXE_ost"))
        .env("OST_SEED", "8")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(
        stdout(&with_env),
        stdout(&ost(&["simulate", "--runs", "2", "--attacks", "100", "--seed", "8"]))
    );
    let bad = Command::new(env!("CARGO_BIN_EXE_ost"))
        .env("OST_SEED", "x")
        .args(args)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn report_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = ost(&[
        "report",
        "--runs",
        "2",
        "--attacks",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "summary.md",
        "solutions.json",
        "investment.json",
        "frontier.csv",
        "comparison.csv",
        "improvement.csv",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let md = fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(md.contains("## Investment"));
    assert!(md.contains("on average"));
    let leftovers = fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 6, "temporary files left behind");
}

#[test]
fn per_user_cost_scenarios_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = builtin_use_case();
    for sg in &mut s.safeguards {
        for level in &mut sg.levels {
            let LevelSpec { level_index, .. } = *level;
            level.indirect_cost_per_group = None;
            level.per_user_cost = Some(0.01 * level_index as f64);
        }
    }
    let path = write_scenario(dir.path(), &s.to_json());
    let records: Vec<SolutionRecord> = serde_json::from_str(&stdout(&ost(&["solve", "--scenario", &path]))).unwrap();
    assert!(
        records.iter().any(|r| r.nsp[0] < 1.0),
        "cheap training should be worth applying"
    );
}
