use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn polygrpd(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polygrpd"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn check<'a>(rep: &'a Value, name: &str) -> &'a Value {
    rep["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()
}

fn strip_wall_time(v: &mut Value) {
    for c in v["checks"].as_array_mut().unwrap() {
        c.as_object_mut().unwrap().remove("wall_time");
    }
}

#[test]
fn so3_structure_passes_with_four_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = polygrpd(&["check-structure", scenario("so3_direct_sum.cfg").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path());
    assert_eq!(rep["schema"], 1);
    assert_eq!(rep["status"], "pass");
    assert_eq!(rep["checks"].as_array().unwrap().len(), 4);
    for c in rep["checks"].as_array().unwrap() {
        for key in ["name", "status", "worst_residual", "tolerance", "samples", "wall_time"] {
            assert!(c.get(key).is_some(), "{key}");
        }
    }
    let csv = std::fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn corrupted_anchor_fails_condition_i() {
    let dir = tempfile::tempdir().unwrap();
    let out = polygrpd(&["check-structure", "--config", scenario("corrupted_anchor.cfg").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let rep = report(dir.path());
    assert_eq!(check(&rep, "cond_i")["status"], "fail");
    assert_eq!(check(&rep, "cond_ii")["status"], "pass");
    assert!(String::from_utf8_lossy(&out.stderr).contains("cond_i failed"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "seed = 1\nbogus = 2\n",
        "seed = \"seven\"\n",
        "seed = 1\n[structure]\nconstructor = \"covelocity\"\n",
        "seed = 1\n[structure]\nconstructor = \"nonexistent\"\n",
        "[structure]\nconstructor = \"covelocity\"\nq = 1\n",
        "not toml at all [",
    ];
    for (i, text) in cases.iter().enumerate() {
        let p = dir.path().join(format!("bad{i}.cfg"));
        std::fs::write(&p, text).unwrap();
        let out = polygrpd(&["check-structure", p.to_str().unwrap()], &dir.path().join("out"));
        assert_eq!(out.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = polygrpd(&["check-structure", "/nonexistent/file.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_seed_can_come_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("noseed.cfg");
    std::fs::write(&p, "[structure]\nconstructor = \"covelocity\"\nq = 1\n").unwrap();
    let out = polygrpd(&["check-structure", p.to_str().unwrap(), "--seed", "3", "--samples", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(dir.path())["seed"], 3);
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["gauge-demo".to_owned(), scenario("so3_direct_sum.cfg").to_str().unwrap().to_owned(), "--samples".into(), "4".into(), "--grid".into(), "200".into()];
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let codes: Vec<_> = [&a, &b].iter().map(|d| polygrpd(&args, d.path()).status.code()).collect();
    assert_eq!(codes[0], codes[1]);
    let (mut ra, mut rb) = (report(a.path()), report(b.path()));
    strip_wall_time(&mut ra);
    strip_wall_time(&mut rb);
    assert_eq!(ra, rb);
    for f in ["gauge.csv", "path.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn integrate_path_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = polygrpd(&["integrate-path", scenario("so3_direct_sum.cfg").to_str().unwrap(), "--grid", "250"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("path.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("t,x0,") && header.ends_with(",residual"));
    assert_eq!(header.split(',').count(), 1 + 6 + 3 + 1);
    assert_eq!(lines.count(), 251);
    assert!(dir.path().join("path.txt").exists());
    assert!(report(dir.path())["data"]["holonomy"].is_array());
}

#[test]
fn classify_reports_the_r3_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let out = polygrpd(&["classify", scenario("r3_counterexample.cfg").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rep = report(dir.path());
    assert_eq!(rep["data"]["lagrangian"], true);
    assert_eq!(rep["data"]["poly_lagrangian"], false);
}

#[test]
fn reduction_scenarios() {
    for (cfg, code) in [("reduce_translation.cfg", 0), ("reduce_rotation.cfg", 0), ("reduce_violating.cfg", 1)] {
        let dir = tempfile::tempdir().unwrap();
        let out = polygrpd(&["reduce", scenario(cfg).to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(code), "{cfg}");
    }
}

#[test]
fn morita_marks_global_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let out = polygrpd(&["morita", scenario("morita_so3.cfg").to_str().unwrap(), "--samples", "10"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rep = report(dir.path());
    assert_eq!(check(&rep, "condition_2")["status"], "not verified — global");
    assert_eq!(check(&rep, "condition_5")["status"], "not verified — global");
    assert_eq!(check(&rep, "orthogonality")["status"], "pass");
}

#[test]
fn relational_models() {
    for (cfg, code) in [("relational_pair.cfg", 0), ("relational_bundle.cfg", 0), ("relational_corrupted.cfg", 1)] {
        let dir = tempfile::tempdir().unwrap();
        let out = polygrpd(&["relational", scenario(cfg).to_str().unwrap()], dir.path());
        assert_eq!(out.status.code(), Some(code), "{cfg}");
        let rep = report(dir.path());
        assert_eq!(check(&rep, "A.2")["status"], if code == 0 { "pass" } else { "fail" });
        assert_eq!(rep["data"]["unit_graph_counterexample_lagrangian"], false);
    }
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("covelocity.cfg");
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_polygrpd"))
            .args(["check-structure", cfg.to_str().unwrap(), "--samples", "5", "--out"])
            .arg(dir.path())
            .env("POLYGRPD_THREADS", v)
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run("1"), Some(0));
    assert_eq!(run("zero"), Some(2));
}

#[test]
fn tolerance_scale_tightens_checks() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["integrate-path".to_owned(), scenario("so3_direct_sum.cfg").to_str().unwrap().to_owned(), "--grid".into(), "500".into()];
    let mut v: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(polygrpd(&v, dir.path()).status.code(), Some(0));
    v.extend(["--tolerance-scale", "1e-4"]);
    assert_eq!(polygrpd(&v, dir.path()).status.code(), Some(1));
    v.pop();
    v.push("-1");
    assert_eq!(polygrpd(&v, dir.path()).status.code(), Some(2));
}
