use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kinetic_lab::report::write_report;
use kinetic_lab::{SweepResult, Verdict};

fn kinetic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinetic"))
        .args(args)
        .env("KINETIC_WORKERS", "1")
        .output()
        .unwrap()
}

fn operator(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "operators", name].iter().collect();
    p.display().to_string()
}

fn report_with(dir: &Path, value: f64) {
    let mut r = SweepResult::new("01-demo", "scaling", &["x"]);
    r.push(vec!["1e0".into()]);
    r.verdict(Verdict::at_most("deviation", value, 0.01));
    write_report(dir, "demo", &[r]).unwrap();
}

#[test]
fn report_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok");
    let bad = dir.path().join("bad");
    let empty = dir.path().join("empty");
    report_with(&ok, 0.001);
    report_with(&bad, 0.5);
    write_report(&empty, "demo", &[]).unwrap();

    let out = kinetic(&["lab", "report", ok.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS 01-demo deviation"));

    let out = kinetic(&["lab", "report", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL 01-demo deviation"));

    assert_eq!(kinetic(&["lab", "report", empty.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing");
    assert_eq!(kinetic(&["lab", "report", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn list_experiments_names_every_kind() {
    let out = kinetic(&["lab", "list-experiments"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for kind in ["scaling", "embedding", "trudinger", "taylor", "mollifier", "lorentz", "tartar", "k-functional"] {
        assert!(text.contains(kind), "{kind}");
    }
}

#[test]
fn structure_check_on_shipped_operators() {
    for name in ["langevin1.toml", "langevin2.toml", "three_layer.toml"] {
        let out = kinetic(&["structure", "check", &operator(name), "--samples", "200"]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn bad_operator_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "layer_dims = [2, 2]\nblocks = [[1.0, 0.0, 0.0, 0.0]]\n").unwrap();
    let out = kinetic(&["structure", "check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn small_lab_run_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(
        &cfg,
        format!(
            "name = \"small\"\noperator = {:?}\n\n[field]\nkind = \"gaussian\"\na = [1.0, 1.0, 1.0]\n\n\
             [[experiments]]\nkind = \"scaling\"\np = [2.0]\norders = [1]\n",
            operator("langevin1.toml")
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = kinetic(&["lab", "run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = kinetic_lab::report::read_report(&out_dir).unwrap();
    assert_eq!(summary.results.len(), 1);
    assert!(summary.passed());
}
