mod common;

use std::process::{Command, Output};

use serde_json::Value;

fn shapegen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shapegen"))
        .args(args)
        .env_remove("SHAPEGEN_SEED")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn pulse() -> String {
    common::spec_path("pulse.sexp").display().to_string()
}

#[test]
fn check_reports_unambiguous() {
    let out = shapegen(&["check", "--spec", &pulse()]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["ambiguity"]["status"], "unambiguous");
    assert_eq!(v["free_dims"], 11);
}

#[test]
fn check_exits_2_on_ambiguity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("amb.sexp");
    std::fs::write(
        &path,
        "shape A = lin(a, b, d);\nexpr = (A . A)* | A*;\nconstraint = a in (0, 1) && b in (0, 1) && d in (1, 2);\n",
    )
    .unwrap();
    let p = path.display().to_string();
    let out = shapegen(&["check", "--spec", &p]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["ambiguity"]["status"], "ambiguous");

    let out = shapegen(&["check", "--spec", &p, "--disambiguate"]);
    assert!(out.status.success());
    assert!(json(&out)["disambiguated"].is_string());

    let out = shapegen(&["words", "--spec", &p, "--z", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(out.stderr.split(|b| *b == b'\n').rfind(|l| !l.is_empty()).unwrap()).unwrap();
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn parse_errors_exit_1_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.sexp");
    std::fs::write(&path, "shape A = lin(a, b, d);\nexpr = A .;\n").unwrap();
    let out = shapegen(&["check", "--spec", &path.display().to_string()]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["line"], 2);
}

#[test]
fn genfun_prints_exact_coefficients() {
    let out = shapegen(&["genfun", "--spec", &pulse(), "--terms", "12"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["numerator"], serde_json::json!([0, 0, 0, 0, 0, 1, 1]));
    assert_eq!(v["denominator"], serde_json::json!([1, 0, 0, 0, -1, -1]));
    assert_eq!(v["taylor"], serde_json::json!([0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 2, 1]));
    assert!((v["rconv"].as_f64().unwrap() - 0.85667).abs() < 1e-4);
}

#[test]
fn tune_prints_summary() {
    let out = shapegen(&["tune", "--spec", &pulse(), "--mean-length", "15"]);
    assert!(out.status.success());
    assert!((json(&out)["z"].as_f64().unwrap() - 0.78631).abs() < 1e-4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("z=0.78631 rconv=0.85667"));
}

#[test]
fn words_are_seeded_and_in_language() {
    let a = shapegen(&["words", "--spec", &pulse(), "--z", "0.7", "--count", "20", "--seed", "5"]);
    let b = shapegen(&["words", "--spec", &pulse(), "--z", "0.7", "--count", "20", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let e = common::load("pulse.sexp");
    let lines = String::from_utf8(a.stdout).unwrap();
    assert_eq!(lines.lines().count(), 20);
    for l in lines.lines() {
        let w: Vec<&str> = l.split(' ').collect();
        assert!(common::derivations(&e.regex, &w) == 1, "{l}");
    }
    let c = Command::new(env!("CARGO_BIN_EXE_shapegen"))
        .args(["words", "--spec", &pulse(), "--z", "0.7", "--count", "20"])
        .env("SHAPEGEN_SEED", "5")
        .output()
        .unwrap();
    assert_eq!(c.stdout, lines.as_bytes());

    let out = shapegen(&["words", "--spec", &pulse(), "--mean-length", "10", "--count", "5", "--exact-length", "9", "--jsonl"]);
    for l in String::from_utf8(out.stdout).unwrap().lines() {
        assert_eq!(serde_json::from_str::<Value>(l).unwrap()["length"], 9);
    }
}

#[test]
fn sample_writes_signals_and_stats_recheck() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let o = out_dir.display().to_string();
    let out = shapegen(&[
        "sample", "--spec", &pulse(), "--count", "5", "--mean-length", "12", "--init", "auto", "--seed", "3",
        "--burn-in", "100", "--out", &o,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["count"], 5);
    for i in 0..5 {
        let csv = std::fs::read_to_string(out_dir.join(format!("signals/{i:03}.csv"))).unwrap();
        assert!(csv.lines().count() > 2);
    }
    let jsonl = out_dir.join("samples.jsonl").display().to_string();
    let stats = shapegen(&["stats", &jsonl, "--spec", &pulse(), "--mean-length", "12"]);
    assert!(stats.status.success(), "{}", String::from_utf8_lossy(&stats.stderr));
    let v = json(&stats);
    assert_eq!(v["count"], 5);
    assert_eq!(v["valuations_checked"], 5);
    assert_eq!(v["membership_violations"], 0);

    let out = shapegen(&[
        "sample", "--spec", &pulse(), "--count", "2", "--fixed-word", "ABCFA", "--init", "pattern", "--format",
        "json", "--project-continuity", "--out", &o,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sig: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("signals/001.json")).unwrap()).unwrap();
    assert_eq!(sig["word"], serde_json::json!(["A", "B", "C", "F", "A"]));
}

#[test]
fn sample_init_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = shapegen(&[
        "sample", "--spec", &pulse(), "--count", "1", "--fixed-word", "A B C F A", "--pso-swarm", "2",
        "--pso-iters", "1", "--pso-restarts", "0", "--out", &dir.path().display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_ring_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report");
    let out = shapegen(&[
        "bench", "ring", "--dims", "2,4", "--c2", "0.9", "--samples", "30", "--repeats", "2", "--init", "auto",
        "--variants", "rejection,cdhr_shrink", "--out", &report.display().to_string(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = json(&out);
    assert_eq!(rows.as_array().unwrap().len(), 4);
    assert_eq!(rows[2]["skipped"], true);
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("n,c1,c2,c,variant"));
    assert!(dir.path().join("report.json").exists());
}
