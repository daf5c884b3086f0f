use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hmbandit"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn small_simulate(out: &Path, seed: &str) -> Output {
    bin()
        .args(["simulate", "--config"])
        .arg(config("fig1.json"))
        .args(["--seed", seed, "--set", "runs=6", "--set", "horizon=800", "--out"])
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn plan_prints_k_opt() {
    let out = bin()
        .args(["plan", "--q", "0.05", "--rho", "0.25", "--lambda", "0.3", "--kmax", "50"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("k_opt = 10"), "{stdout}");
}

#[test]
fn missing_config_is_a_config_error() {
    let out = bin().args(["simulate", "--config", "missing.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_and_syntax_errors_exit_2_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("fig1.json")).unwrap();

    let bad_key = dir.path().join("bad_key.json");
    std::fs::write(&bad_key, text.replacen('{', "{\n  \"horizn\": 5,", 1)).unwrap();
    let out = bin().args(["simulate", "--config"]).arg(&bad_key).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizn"));

    let bad_syntax = dir.path().join("bad_syntax.json");
    std::fs::write(&bad_syntax, "{\n  \"lambda\": 0.3,\n  oops\n}").unwrap();
    let out = bin().args(["simulate", "--config"]).arg(&bad_syntax).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = bin()
        .args(["simulate", "--config"])
        .arg(config("fig1.json"))
        .args(["--set", "no_such=1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_experiment_is_rejected() {
    // truth off the grid
    let out = bin()
        .args(["simulate", "--config"])
        .arg(config("fig1.json"))
        .args(["--set", "true_model.q=0.07"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(small_simulate(&a, "7").status.success());
    assert!(small_simulate(&b, "7").status.success());
    assert!(small_simulate(&c, "8").status.success());
    for f in ["steps.csv", "epochs.csv", "agg.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(std::fs::read(a.join("steps.csv")).unwrap(), std::fs::read(c.join("steps.csv")).unwrap());
}

#[test]
fn golden_headers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    assert!(small_simulate(&out, "1").status.success());
    assert_eq!(first_line(&out.join("steps.csv")), "run_id,t,learner_cum_reward,oracle_cum_reward,regret");
    assert_eq!(first_line(&out.join("epochs.csv")), "run_id,epoch,t_of_rec,k,suboptimal,posterior_mass_true");
    assert_eq!(first_line(&out.join("agg.csv")), "t,mean_regret,std_regret,mean_posterior_mass_true");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["config"]["runs"], 6);

    let steps = std::fs::read_to_string(out.join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 1 + 6 * 800);
    let agg = std::fs::read_to_string(out.join("agg.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 800);
}

#[test]
fn plot_renders_and_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(small_simulate(&sim, "1").status.success());

    for kind in ["regret", "posterior"] {
        let svg = dir.path().join(format!("{kind}.svg"));
        let out = bin()
            .args(["plot", "--csv"])
            .arg(sim.join("agg.csv"))
            .args(["--kind", kind, "--logx", "--out"])
            .arg(&svg)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    }

    let header_only = dir.path().join("empty.csv");
    std::fs::write(&header_only, "t,mean_regret,std_regret,mean_posterior_mass_true\n").unwrap();
    let target = dir.path().join("empty.svg");
    let out = bin().args(["plot", "--csv"]).arg(&header_only).args(["--kind", "regret", "--out"]).arg(&target).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    assert!(!target.exists());

    // steps.csv does not match the aggregate schema
    let target = dir.path().join("wrong.svg");
    let out = bin()
        .args(["plot", "--csv"])
        .arg(sim.join("steps.csv"))
        .args(["--kind", "regret", "--out"])
        .arg(&target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
}

#[test]
fn analyze_writes_report_and_regions() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["analyze", "--config"])
        .arg(config("fig1.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("separation.json")).unwrap()).unwrap();
    let delta = report["delta"].as_f64().unwrap();
    assert!((delta - 1.936e-5).abs() < 1e-7, "{delta}");
    assert_eq!(report["delta_argmin_k"], 1);
    assert!(report["max_confounders"].as_u64().unwrap() <= 1);

    let regions = std::fs::read_to_string(dir.path().join("regions.csv")).unwrap();
    assert_eq!(regions.lines().next().unwrap(), "q,rho,k,region,kl_at_k_star,confounders");
    assert_eq!(regions.lines().count(), 1 + 25);
    // (0.15, 0.35) plays k = 2
    let row = regions
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|c| c[0].parse::<f64>().unwrap() == 0.15 && c[1].parse::<f64>().unwrap() == 0.35)
        .unwrap();
    assert_eq!(row[2], "2");
}
