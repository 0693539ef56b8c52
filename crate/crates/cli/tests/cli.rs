use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use powergame::{FiniteGame, NetworkModel, SolveReport};
use powergame_cli::commands::{
    FiniteReport, NbsReport, ParetoReport, PricingReport, PricingSweep, RepeatedReport, SocialReport,
};
use powergame_cli::config::PAPER_CONFIG;
use tempfile::TempDir;

fn powergame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_powergame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// The bundled config with a coarser grid, written into `dir`.
fn coarse_config(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("config.json");
    let text = PAPER_CONFIG.replace("\"n_per_axis\": 400", &format!("\"n_per_axis\": {n}"));
    fs::write(&path, text).unwrap();
    path
}

fn run_in(dir: &Path, config: Option<&Path>, args: &[&str]) -> Output {
    let mut all: Vec<&str> = vec!["--out", dir.to_str().unwrap()];
    if let Some(c) = config {
        all.extend(["--config", c.to_str().unwrap()]);
    }
    all.extend(args);
    powergame(&all)
}

fn read<T: serde::de::DeserializeOwned>(path: PathBuf) -> T {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ne_prints_the_reference_figures() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), None, &["ne"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("s*/σ² = [2.99, 1.97]"), "{text}");
    assert!(text.contains("σ²u/t = [0.269, 0.407]"), "{text}");

    let report: SolveReport = read(tmp.path().join("ne.json"));
    report.validate(&NetworkModel::reference()).unwrap();
    assert!(report.converged);
    let csv = fs::read_to_string(tmp.path().join("ne.csv")).unwrap();
    assert!(csv.starts_with("iter,s_1,s_2,u_1,u_2,gamma_1,gamma_2\n"));
    assert_eq!(csv.lines().count(), report.trace.len() + 1);
}

#[test]
fn zero_price_reproduces_the_ne() {
    let tmp = TempDir::new().unwrap();
    let cfg = coarse_config(tmp.path(), 50);
    assert!(run_in(tmp.path(), Some(&cfg), &["ne"]).status.success());
    assert!(run_in(tmp.path(), Some(&cfg), &["pricing", "--alpha", "0"])
        .status
        .success());
    let ne: SolveReport = read(tmp.path().join("ne.json"));
    let priced: PricingReport = read(tmp.path().join("pricing.json"));
    assert!(priced.report.solution.max_distance(&ne.solution) <= 10.0 * ne.tol);
}

#[test]
fn pricing_uses_the_configured_alpha() {
    let tmp = TempDir::new().unwrap();
    let cfg = coarse_config(tmp.path(), 100);
    let out = run_in(tmp.path(), Some(&cfg), &["pricing"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("s~/σ² = [2.17, 1.57]"), "{}", stdout(&out));
    let r: PricingReport = read(tmp.path().join("pricing.json"));
    assert_eq!(r.alpha_normalized, 0.12);
    r.report.validate(&NetworkModel::reference()).unwrap();
    assert!(r.frontier_distance <= 0.01);
}

#[test]
fn pricing_sweep_writes_one_row_per_alpha() {
    let tmp = TempDir::new().unwrap();
    let cfg = coarse_config(tmp.path(), 40);
    let out = run_in(tmp.path(), Some(&cfg), &["pricing", "--sweep", "0:0.1:3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep: PricingSweep = read(tmp.path().join("pricing.json"));
    assert_eq!(sweep.points.len(), 3);
    let csv = fs::read_to_string(tmp.path().join("pricing.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("alpha_norm,"));
}

#[test]
fn pricing_without_alpha_is_a_validation_error() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("config.json");
    fs::write(&path, PAPER_CONFIG.replace("\"pricing\": { \"alpha\": 0.12 },", "")).unwrap();
    let out = run_in(tmp.path(), Some(&path), &["pricing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pricing.alpha"));
    assert!(run_in(tmp.path(), Some(&path), &["pricing", "--alpha", "0.12"])
        .status
        .success());
}

#[test]
fn finite_scenarios() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), None, &["finite"]);
    assert!(out.status.success());
    let nfe: FiniteReport = read(tmp.path().join("finite.json"));
    assert_eq!(nfe.power_level, 10.0);
    assert_eq!(nfe.reduction.kept, vec![vec![0], vec![1]]);
    assert_eq!(nfe.nash.len(), 1);
    assert_eq!(nfe.nash[0].powers, vec![0.0, 10.0]);
    assert!(nfe.ce_uniform.is_none());
    assert!(stdout(&out).contains("pure NE: [0.000, 10.0]"));

    let out = run_in(tmp.path(), None, &["finite", "--scenario", "ic"]);
    assert!(out.status.success());
    let ic: FiniteReport = read(tmp.path().join("finite.json"));
    assert!(ic.reduction.log.is_empty());
    let powers: Vec<Vec<f64>> = ic.nash.iter().map(|p| p.powers.clone()).collect();
    assert_eq!(powers, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    let ce = ic.ce_uniform.unwrap();
    assert!(ce.holds && ce.worst_slack >= 0.0);

    let out = run_in(tmp.path(), None, &["finite", "--ce-uniform"]);
    let nfe: FiniteReport = read(tmp.path().join("finite.json"));
    assert!(out.status.success());
    assert!(nfe.ce_uniform.unwrap().holds);
}

#[test]
fn finite_csv_marks_survivors_and_equilibria() {
    let tmp = TempDir::new().unwrap();
    assert!(run_in(tmp.path(), None, &["finite"]).status.success());
    let csv = fs::read_to_string(tmp.path().join("finite.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "s1,s2,u1,u2,survives,nash");
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[2], "0,10,0,0.99,1,1");
}

#[test]
fn near_far_assumption_violation_exits_2() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("config.json");
    fs::write(&path, PAPER_CONFIG.replace("\"h1\": 0.1", "\"h1\": 0.9")).unwrap();
    let out = run_in(tmp.path(), Some(&path), &["finite"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("finite.nfe"));
}

#[test]
fn efficiency_commands_round_trip() {
    let tmp = TempDir::new().unwrap();
    let cfg = coarse_config(tmp.path(), 100);
    let model = NetworkModel::reference();
    for cmd in ["pareto", "social", "nbs", "repeated"] {
        let out = run_in(tmp.path(), Some(&cfg), &[cmd]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }

    let pareto: ParetoReport = read(tmp.path().join("pareto.json"));
    assert!(!pareto.frontier.is_empty() && pareto.improving > 0);
    for p in pareto.frontier.iter().chain([&pareto.ne]) {
        p.validate(&model).unwrap();
    }
    let grid_csv = fs::read_to_string(tmp.path().join("pareto.csv")).unwrap();
    assert_eq!(grid_csv.lines().count(), 100 * 100 + 1);

    let social: SocialReport = read(tmp.path().join("social.json"));
    social.optimum.validate(&model).unwrap();
    assert!(social.in_improvement_region);
    assert!((social.optimum.normalized[0] - 0.278).abs() <= 0.005);
    assert!((social.optimum.normalized[1] - 0.446).abs() <= 0.005);

    let nbs: NbsReport = read(tmp.path().join("nbs.json"));
    nbs.bargaining.validate(&model).unwrap();
    assert!(nbs.ordered);
    assert!((nbs.bargaining.normalized[0] - 0.288).abs() <= 0.005);
    assert!((nbs.bargaining.normalized[1] - 0.434).abs() <= 0.005);
    let nbs_csv = fs::read_to_string(tmp.path().join("nbs.csv")).unwrap();
    let labels: Vec<&str> = nbs_csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(labels, ["ne", "social", "nbs"]);

    let rep: RepeatedReport = read(tmp.path().join("repeated.json"));
    rep.cooperate.validate(&model).unwrap();
    assert!(rep.min_discount > 0.0 && rep.min_discount < 1.0);
    assert!(rep.checks.iter().all(|c| !c.profitable));
    let trace = fs::read_to_string(tmp.path().join("repeated.csv")).unwrap();
    assert_eq!(trace.lines().count(), rep.stages + 1);
}

#[test]
fn nbs_console_summary() {
    let tmp = TempDir::new().unwrap();
    let cfg = coarse_config(tmp.path(), 100);
    let out = run_in(tmp.path(), Some(&cfg), &["nbs"]);
    let text = stdout(&out);
    assert!(text.contains("ṡ/σ² = [2.26, 1.52]"), "{text}");
    assert!(text.contains("σ²u/t = [0.289, 0.434]"), "{text}");
}

#[test]
fn repeated_below_threshold_makes_deviation_pay() {
    let tmp = TempDir::new().unwrap();
    let cfg = coarse_config(tmp.path(), 100);
    let out = run_in(
        tmp.path(),
        Some(&cfg),
        &["repeated", "--delta", "0.5", "--deviant", "1", "--stages", "5"],
    );
    assert!(out.status.success());
    let rep: RepeatedReport = read(tmp.path().join("repeated.json"));
    assert_eq!(rep.deviant, Some(0));
    assert!(rep.checks[0].profitable);
    assert!(!rep.checks[1].profitable);
    assert_eq!(
        run_in(tmp.path(), Some(&cfg), &["repeated", "--delta", "1"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn csv_artifacts_are_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = coarse_config(a.path(), 60);
    for cmd in ["finite", "ne", "pricing", "pareto", "social", "nbs", "repeated"] {
        assert!(run_in(a.path(), Some(&cfg), &[cmd]).status.success(), "{cmd}");
        assert!(run_in(b.path(), Some(&cfg), &[cmd]).status.success(), "{cmd}");
        let name = format!("{cmd}.csv");
        assert_eq!(
            fs::read(a.path().join(&name)).unwrap(),
            fs::read(b.path().join(&name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn json_flag_prints_the_artifact() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), None, &["--json", "ne"]);
    assert!(out.status.success());
    let printed: SolveReport = serde_json::from_str(&stdout(&out)).unwrap();
    let written: SolveReport = read(tmp.path().join("ne.json"));
    assert_eq!(printed, written);

    let out = run_in(tmp.path(), None, &["--quiet", "ne"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
}

#[test]
fn finite_game_artifact_revalidates() {
    let tmp = TempDir::new().unwrap();
    assert!(run_in(tmp.path(), None, &["finite", "--scenario", "ic"])
        .status
        .success());
    let text = fs::read_to_string(tmp.path().join("finite.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let game: FiniteGame = serde_json::from_value(value["game"].clone()).unwrap();
    assert_eq!(game.shape(), vec![2, 2]);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();

    let bad_weights = tmp.path().join("weights.json");
    fs::write(&bad_weights, PAPER_CONFIG.replace("[0.5, 0.5]", "[0.5, 0.6]")).unwrap();
    let out = run_in(tmp.path(), Some(&bad_weights), &["social"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("weights"));

    let broken = tmp.path().join("broken.json");
    fs::write(&broken, "{\n  \"network\": ,\n}").unwrap();
    let out = run_in(tmp.path(), Some(&broken), &["ne"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let stalled = tmp.path().join("stalled.json");
    fs::write(&stalled, PAPER_CONFIG.replace("\"max_iter\": 10000", "\"max_iter\": 2")).unwrap();
    let out = run_in(tmp.path(), Some(&stalled), &["ne"]);
    assert_eq!(out.status.code(), Some(3));
    let report: SolveReport = read(tmp.path().join("ne.json"));
    assert!(!report.converged);
    report.validate(&NetworkModel::reference()).unwrap();

    let out = run_in(tmp.path(), Some(&tmp.path().join("missing.json")), &["ne"]);
    assert_eq!(out.status.code(), Some(4));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = powergame(&["--out", blocker.join("sub").to_str().unwrap(), "ne"]);
    assert_eq!(out.status.code(), Some(4));
}
