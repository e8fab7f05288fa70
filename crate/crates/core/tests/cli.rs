use invsq::cli::{main_with_args, Record, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("invsq").chain(args.iter().copied()))
}

fn csv_row(path: &Path, theorem: &str) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| l.starts_with(&format!("{theorem},"))).unwrap();
    line.split(',').map(String::from).collect()
}

fn record(id: &str, pass: bool) -> Record {
    let mut r: Record = serde_json::from_value(serde_json::json!({
        "schema": "certificate_v1", "suite": "hardy", "id": id, "theorem": "hardy",
        "d": 3, "a": 0.0, "s": 1.0, "p": 2.0, "alpha": null, "eps": null, "weight": "1",
        "metric": "max_ratio", "value": 0.3, "bound": 50.0, "pass": true, "scope": "radial", "payload": null
    }))
    .unwrap();
    r.pass = pass;
    r
}

#[test]
fn windows_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    assert_eq!(run(&["windows", "--d", "3", "--a", "2", "--s", "1", "--out", out.to_str().unwrap()]), EXIT_PASS);
    assert_eq!(csv_row(&out, "equiv_forward")[1..3], ["1", "inf"]);
    assert_eq!(run(&["windows", "--d", "3", "--a", "0", "--s", "1", "--out", out.to_str().unwrap()]), EXIT_PASS);
    assert_eq!(csv_row(&out, "hardy")[1..3], ["1", "3"]);
    assert_eq!(run(&["windows", "--d", "4", "--a", "-1", "--s", "0.5"]), EXIT_PASS);
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["windows", "--d", "2", "--a", "0", "--s", "1"]), EXIT_USAGE);
    assert_eq!(run(&["windows", "--d", "3", "--a", "-0.3", "--s", "1"]), EXIT_USAGE);
    assert_eq!(run(&["verify", "everything"]), EXIT_USAGE);
    assert_eq!(run(&["verify", "hardy", "--quick", "--full"]), EXIT_USAGE);
    assert_eq!(run(&["verify", "hardy", "--weight", "bogus"]), EXIT_USAGE);
    assert_eq!(run(&["verify", "hardy", "--d", "3", "--a", "0", "--s", "1", "--p", "5"]), EXIT_USAGE);
    assert_eq!(run(&["verify", "morawetz", "--eps", "1.5"]), EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"preset": "quick", "sead": 3}"#).unwrap();
    assert_eq!(run(&["verify", "hardy", "--config", cfg.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("certs");
    let cfg = dir.path().join("run.json");
    let body = serde_json::json!({
        "preset": "quick", "params": [[3, 0.5]], "s": [1.0], "p": [2.0], "weights": ["1"],
        "family_size": 8, "seed": 5, "out": out
    });
    std::fs::write(&cfg, body.to_string()).unwrap();
    assert_eq!(run(&["verify", "hardy", "--config", cfg.to_str().unwrap(), "--seed", "9"]), EXIT_PASS);
    let jsons: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    assert_eq!(jsons.len(), 1);
    let rec = Record::from_json(&std::fs::read_to_string(&jsons[0]).unwrap()).unwrap();
    assert!(rec.pass);
    assert_eq!((rec.d, rec.a, rec.s, rec.p), (3, 0.5, Some(1.0), Some(2.0)));
    assert_eq!(rec.payload["seed"], 9);
    assert_eq!(rec.payload["family_size"], 8);
    assert!(out.join("summary.csv").exists());
}

#[test]
fn report_counts_failures_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    record("hardy_a", true).write(dir.path()).unwrap();
    record("hardy_b", false).write(dir.path()).unwrap();
    std::fs::write(dir.path().join("junk.json"), "{").unwrap();
    assert_eq!(run(&["report", dir.path().to_str().unwrap()]), EXIT_PASS);
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("1/2 certificates pass."), "{md}");
    assert!(md.contains("| hardy | 1/2 |"));
    assert!(dir.path().join("report.csv").exists());

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(run(&["report", empty.path().to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_invsq");
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code().unwrap();
    assert_eq!(code(&["windows", "--d", "5", "--a", "1", "--s", "2"]), EXIT_PASS);
    assert_eq!(code(&["windows", "--d", "2", "--a", "0", "--s", "1"]), EXIT_USAGE);
    assert_eq!(code(&["--help"]), EXIT_PASS);

    // runtime errors such as an unwritable output directory exit with 1
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let args = ["verify", "hardy", "--d", "3", "--a", "0", "--s", "1", "--p", "2", "--quick", "--out", blocker.to_str().unwrap()];
    assert_eq!(code(&args), EXIT_FAIL);
}
