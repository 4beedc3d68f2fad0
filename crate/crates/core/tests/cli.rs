use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use regime_dns::gibbs::read_draws;
use regime_dns::regime_tree::RegimeTree;

const BIN: &str = env!("CARGO_BIN_EXE_regime-dns");

const FAST: &str = r#"{
  "simulation": {"t_len": 80},
  "data": {"candidates": ["INFL", "UNRATE"]},
  "search": {"max_regimes": 2, "min_months": 12, "chain": {"n_burn": 20, "n_draws": 40, "thinning": 4, "store_factors": false}},
  "chain": {"n_burn": 20, "n_draws": 40, "thinning": 4},
  "report": {"horizon": 6, "bins": 10}
}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), FAST).unwrap();
    let out = run(tmp.path(), &["simulate", "--config", "cfg.json", "--seed", "1", "--out", "sim", "--replications", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    tmp
}

fn data_args() -> Vec<&'static str> {
    vec!["--config", "cfg.json", "--yields", "sim/rep_001/yields.csv", "--macro", "sim/rep_001/macro.csv"]
}

#[test]
fn simulate_is_deterministic_and_writes_each_replication() {
    let tmp = setup();
    let dir = tmp.path();
    for out in ["a", "b"] {
        let o = run(dir, &["simulate", "--config", "cfg.json", "--seed", "1", "--out", out, "--replications", "2"]);
        assert!(o.status.success());
    }
    for rep in ["rep_001", "rep_002"] {
        for f in ["yields.csv", "macro.csv", "labels.csv", "factors.csv"] {
            let a = fs::read(dir.join("a").join(rep).join(f)).unwrap();
            let b = fs::read(dir.join("b").join(rep).join(f)).unwrap();
            assert_eq!(a, b, "{rep}/{f}");
        }
    }
    assert!(!dir.join("a/rep_003").exists());
    assert_ne!(
        fs::read(dir.join("a/rep_001/yields.csv")).unwrap(),
        fs::read(dir.join("a/rep_002/yields.csv")).unwrap()
    );
    assert!(dir.join("a/truth.json").exists());
}

#[test]
fn corrupt_design_exits_with_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("design.json"), "{\"truth\": [").unwrap();
    let o = run(tmp.path(), &["simulate", "--design", "design.json", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse error in design.json"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), r#"{"chian": {}}"#).unwrap();
    let o = run(tmp.path(), &["stats", "--config", "cfg.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_macro_file_exits_with_input_error() {
    let tmp = setup();
    let o = run(
        tmp.path(),
        &["grow", "--config", "cfg.json", "--yields", "sim/rep_001/yields.csv", "--macro", "absent.csv", "--out", "g"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn single_regime_cap_emits_a_leaf() {
    let tmp = setup();
    let mut args = vec!["grow", "--out", "g", "--max-regimes", "1"];
    args.extend(data_args());
    let o = run(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tree = RegimeTree::read(&tmp.path().join("g/tree.json")).unwrap();
    assert_eq!(tree, RegimeTree::single_leaf());
}

#[test]
fn grow_prints_the_rule_and_logs_every_candidate() {
    let tmp = setup();
    let mut args = vec!["grow", "--out", "g"];
    args.extend(data_args());
    let o = run(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("step 1: split leaf 1 on"));
    assert!(stdout.contains("regime 2:"));
    let log = fs::read_to_string(tmp.path().join("g/evaluations.csv")).unwrap();
    assert!(log.starts_with("step,leaf,leaf_path,variable,threshold,log_marginal,seed,status,selected"));
    assert_eq!(log.lines().filter(|l| l.ends_with(",true")).count(), 1);
}

#[test]
fn trivial_tree_fit_equals_default_fit_and_is_repeatable() {
    let tmp = setup();
    let dir = tmp.path();
    RegimeTree::single_leaf().write(&dir.join("leaf.json")).unwrap();
    let mut a = vec!["fit", "--out", "f1"];
    a.extend(data_args());
    let mut b = vec!["fit", "--out", "f2", "--tree", "leaf.json"];
    b.extend(data_args());
    let mut c = vec!["fit", "--out", "f3"];
    c.extend(data_args());
    for args in [a, b, c] {
        let o = run(dir, &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["lambda.csv", "A.csv", "H.csv", "mu.csv", "Q.csv", "gamma.csv", "factors.csv", "draws.json"] {
        let x = fs::read(dir.join("f1/draws").join(f)).unwrap();
        assert_eq!(x, fs::read(dir.join("f2/draws").join(f)).unwrap(), "{f}");
        assert_eq!(x, fs::read(dir.join("f3/draws").join(f)).unwrap(), "{f}");
    }
    let (draws, manifest, labels) = read_draws(&dir.join("f1/draws")).unwrap();
    assert_eq!(draws.len(), 10);
    assert_eq!(manifest.n_regimes, 1);
    assert_eq!(labels.unwrap().len(), 80);
}

#[test]
fn seed_flag_overrides_config_and_changes_output() {
    let tmp = setup();
    let dir = tmp.path();
    for (out, seed) in [("s1", "1"), ("s2", "2")] {
        let mut args = vec!["fit", "--out", out, "--seed", seed];
        args.extend(data_args());
        assert!(run(dir, &args).status.success());
    }
    assert_ne!(
        fs::read(dir.join("s1/draws/A.csv")).unwrap(),
        fs::read(dir.join("s2/draws/A.csv")).unwrap()
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("s2/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 2);
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn report_has_table_columns_and_is_idempotent() {
    let tmp = setup();
    let dir = tmp.path();
    let mut fit = vec!["fit", "--out", "f", "--tree", "sim/tree.json"];
    fit.extend(data_args());
    assert!(run(dir, &fit).status.success());
    for out in ["r1", "r2"] {
        let mut args = vec!["report", "--out", out, "--draws", "f/draws", "--plots"];
        args.extend(data_args());
        let o = run(dir, &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let resid = fs::read_to_string(dir.join("r1/residuals.csv")).unwrap();
    assert_eq!(resid.lines().next().unwrap(), "Maturity,Mean,Std,Min,Max,MAE,RMSE");
    assert_eq!(resid.lines().count(), 1 + 13 + 4);
    let irf = fs::read_to_string(dir.join("r1/irf.csv")).unwrap();
    assert_eq!(irf.lines().next().unwrap(), "regime,shock,variable,horizon,lo,point,hi");
    assert!(fs::read_to_string(dir.join("r1/t_tests.csv")).unwrap().starts_with("parameter,regime_a,regime_b"));
    for f in ["residuals.csv", "curves.csv", "t_tests.csv", "irf.csv", "densities.csv"] {
        assert_eq!(fs::read(dir.join("r1").join(f)).unwrap(), fs::read(dir.join("r2").join(f)).unwrap(), "{f}");
    }
    assert!(dir.join("r1/plots/curve_all.svg").exists());
}

#[test]
fn report_rejects_empty_draws() {
    let tmp = setup();
    let dir = tmp.path();
    let mut fit = vec!["fit", "--out", "f"];
    fit.extend(data_args());
    assert!(run(dir, &fit).status.success());
    let manifest = dir.join("f/draws/draws.json");
    let mut m: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    m["n_draws"] = 0.into();
    fs::write(&manifest, m.to_string()).unwrap();
    let mut args = vec!["report", "--out", "r", "--draws", "f/draws"];
    args.extend(data_args());
    let o = run(dir, &args);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no draws"));
}

#[test]
fn stats_writes_descriptive_table() {
    let tmp = setup();
    let o = run(tmp.path(), &["stats", "--out", "st", "--yields", "sim/rep_001/yields.csv"]);
    assert!(o.status.success());
    let text = fs::read_to_string(tmp.path().join("st/descriptive.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "Maturity,Mean,Std,Min,Max,rho(1),rho(6),rho(12),rho(30)"
    );
    assert_eq!(text.lines().count(), 14);
}

#[test]
fn yields_macro_model_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("cfg.json"), FAST).unwrap();
    // a design whose simulated drivers include the three model factors
    let mut design = serde_json::to_value(regime_dns::simulation::default_design()).unwrap();
    design["drivers"] = serde_json::json!(["CU", "FFR", "INFL", "UNRATE"]);
    fs::write(dir.join("design.json"), design.to_string()).unwrap();
    let o = run(dir, &["simulate", "--config", "cfg.json", "--design", "design.json", "--out", "sim"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut fit = vec!["fit", "--out", "f", "--tree", "sim/tree.json", "--model", "yields-macro"];
    fit.extend(data_args());
    let o = run(dir, &fit);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (draws, manifest, _) = read_draws(&dir.join("f/draws")).unwrap();
    assert_eq!(manifest.n_macro, 3);
    assert_eq!(draws.params[0].state_dim(), 6);
    let mut report = vec!["report", "--out", "r", "--draws", "f/draws", "--model", "yields-macro"];
    report.extend(data_args());
    let o = run(dir, &report);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let irf = fs::read_to_string(dir.join("r/irf.csv")).unwrap();
    assert!(irf.contains(",INFL,FFR,"));
}
