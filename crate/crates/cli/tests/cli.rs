use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nurs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nurs"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("NURS_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn sample_is_byte_identical_across_runs_and_workers() {
    let tmp = TempDir::new().unwrap();
    let args = ["sample", "--target", "gaussian:diag=1,0.25", "--steps", "300", "--chains", "3", "--seed", "11"];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(nurs(&args, &a).status.success());
    let other = Command::new(env!("CARGO_BIN_EXE_nurs"))
        .args(args)
        .arg("--out")
        .arg(&b)
        .env("NURS_WORKERS", "1")
        .output()
        .unwrap();
    assert!(other.status.success());
    for f in ["states.csv", "transitions.jsonl", "summary.csv"] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
}

#[test]
fn single_step_gives_single_row() {
    let tmp = TempDir::new().unwrap();
    let o = nurs(&["sample", "--steps", "1", "--burn-in", "5"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let states = read(tmp.path(), "states.csv");
    let lines: Vec<_> = states.lines().collect();
    assert_eq!(lines, [lines[0], lines[1]]);
    assert_eq!(lines[0], "chain,step,coord_0,coord_1");
    assert!(lines[1].starts_with("0,0,"));
    let jsonl = read(tmp.path(), "transitions.jsonl");
    assert_eq!(jsonl.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["chain"], 0);
    assert!(v["next_state"].is_array());
}

#[test]
fn every_kernel_runs() {
    for k in ["nurs", "nurs-progressive", "rwm", "har-gaussian", "inf-orbit-uniform", "inf-orbit-adjusted"] {
        let tmp = TempDir::new().unwrap();
        let o = nurs(&["sample", "--kernel", k, "--steps", "50"], tmp.path());
        assert!(o.status.success(), "{k}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(read(tmp.path(), "states.csv").lines().count(), 51);
    }
}

#[test]
fn gaussian_only_kernel_rejects_funnel() {
    let tmp = TempDir::new().unwrap();
    let o = nurs(&["sample", "--kernel", "har-gaussian", "--target", "funnel:d=2"], tmp.path());
    assert!(!o.status.success());
}

#[test]
fn invalid_values_fail_before_running() {
    let tmp = TempDir::new().unwrap();
    for args in [
        &["sample", "--h", "-1"][..],
        &["sample", "--eps", "nan"],
        &["sample", "--steps", "0"],
        &["sample", "--max-doublings", "60"],
        &["sample", "--kernel", "hmc"],
        &["sample", "--target", "gaussian:diag=1,-2"],
        &["sample", "--theta0", "1,2,3"],
    ] {
        let o = nurs(args, &tmp.path().join("x"));
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!tmp.path().join("x").join("states.csv").exists(), "{args:?}");
    }
}

#[test]
fn config_file_is_merged_and_checked() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nsteps = 7\nh = 0.3\n").unwrap();
    let o = nurs(&["sample", "--config", cfg.to_str().unwrap(), "--steps", "4"], &tmp.path().join("a"));
    assert!(o.status.success());
    assert_eq!(read(&tmp.path().join("a"), "states.csv").lines().count(), 5);
    let echoed = read(&tmp.path().join("a"), "config.txt");
    assert!(echoed.contains("h = 0.3") && echoed.contains("steps = 4"), "{echoed}");

    std::fs::write(&cfg, "steps = 7\nstep_size = 0.3\n").unwrap();
    let o = nurs(&["sample", "--config", cfg.to_str().unwrap()], &tmp.path().join("b"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
}

#[test]
fn bad_worker_count_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nurs"))
        .args(["sample", "--steps", "3", "--out"])
        .arg(tmp.path())
        .env("NURS_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn funnel_without_stopping_rule_builds_full_orbits() {
    let tmp = TempDir::new().unwrap();
    let o = nurs(
        &["funnel", "--target", "funnel:d=3", "--max-doublings", "6", "--steps", "400", "--thin", "1", "--h", "0.05"],
        tmp.path(),
    );
    assert!(o.status.code().is_some_and(|c| c == 0 || c == 3));
    let jsonl = read(tmp.path(), "transitions.jsonl");
    assert_eq!(jsonl.lines().count(), 400);
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["orbit_size"], 64);
    }
    for f in ["funnel_jumps.csv", "funnel_acceptance.csv", "funnel_histogram.csv", "funnel_scatter.csv", "verdict.txt"] {
        assert!(tmp.path().join(f).exists(), "{f}");
    }
    assert_eq!(read(tmp.path(), "funnel_acceptance.csv").lines().count(), 19);
}

#[test]
fn orbit_symmetry_verdict() {
    let tmp = TempDir::new().unwrap();
    let o = nurs(&["orbit-symmetry", "--target", "gaussian:diag=1,4", "--max-doublings", "4"], tmp.path());
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("PASS orbit-symmetry"));
    assert_eq!(read(tmp.path(), "verdict.txt").trim(), stdout(&o).trim());
    assert!(read(tmp.path(), "orbit_symmetry.csv").lines().count() > 1);
}

#[test]
fn coupling_verdict() {
    let tmp = TempDir::new().unwrap();
    let o = nurs(&["coupling", "--draws", "20000"], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS coupling"));
    assert_eq!(read(tmp.path(), "coupling.csv").lines().count(), 20001);
}

#[test]
fn tv_verdict() {
    let tmp = TempDir::new().unwrap();
    let o = nurs(&["tv", "--h-values", "0.4,0.2"], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS tv"));
    let csv = read(tmp.path(), "tv.csv");
    assert_eq!(csv.lines().next().unwrap(), "h,tv_quadrature,error_estimate,log_tv_exact,bound,pass");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn acceptance_verdict() {
    let tmp = TempDir::new().unwrap();
    let o = nurs(&["acceptance", "--target", "gaussian:diag=1,0.5", "--states", "3", "--draws", "20000"], tmp.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("PASS acceptance"));
    assert_eq!(read(tmp.path(), "acceptance.csv").lines().count(), 13);
}
