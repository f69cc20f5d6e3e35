use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ovgrasp"));
    c.env_remove("OVGRASP_LOG");
    c
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_kitchen(out: &Path, seed: &str) -> Output {
    let scenario = fixture("kitchen.json");
    run(&["run", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed])
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_kitchen(dir.path(), "7");
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trace.jsonl", "telemetry.jsonl", "detections.jsonl", "ground_truth.json", "metrics.json"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["g_count"], 1);
    assert_eq!(metrics["frames_to_g"], 5);
}

#[test]
fn seeded_runs_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_kitchen(a.path(), "7").status.success());
    assert!(run_kitchen(b.path(), "7").status.success());
    for f in ["metrics.json", "trace.jsonl", "telemetry.jsonl"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn missing_scenario_is_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["run", "--scenario", "/nonexistent/scene.json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/scene.json"), "{}", stderr(&o));
}

#[test]
fn malformed_scenario_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"scene":[{"label":"cup","position":[0,0,600],"extent":[80,-1,80],"grasp_type":"cylindrical"}],"hand_path":[{"t":0,"u":1,"v":1,"d":300}]}"#,
    )
    .unwrap();
    let o = run(&["run", "--scenario", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scene[0].extent"), "{}", stderr(&o));
}

#[test]
fn gas_table_flags_inconsistent_rows() {
    let o = run(&["eval-gas", "--table", fixture("published_gas_components.csv").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("push-button") && l.contains("cylindrical")).unwrap();
    assert!(line.ends_with("INCONSISTENT"), "{line}");
    for l in out.lines().filter(|l| l.starts_with("proposed")) {
        assert!(l.ends_with("ok"), "{l}");
    }
}

#[test]
fn gas_trials_reproduce_components() {
    let o = run(&["eval-gas", "--trials", fixture("proposed_trials.csv").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("92.00") && out.contains("83.33") && out.contains("87.67"), "{out}");
    assert!(out.contains("87.00"), "{out}");
}

#[test]
fn bad_csv_row_is_reported_by_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trials.csv");
    std::fs::write(&path, "object,grasp_type,grasping,maintaining\napple,spherical,1,1\nplum,spherical,1,0.7\n").unwrap();
    let o = run(&["eval-gas", "--trials", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 2 (line 3)"), "{}", stderr(&o));
}

#[test]
fn ap_of_a_perfect_log_is_one() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_kitchen(dir.path(), "7").status.success());
    let o = run(&[
        "eval-ap",
        "--detections",
        dir.path().join("detections.jsonl").to_str().unwrap(),
        "--ground-truth",
        dir.path().join("ground_truth.json").to_str().unwrap(),
        "--vocab",
        fixture("ablation_vocab_open.json").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert_eq!(row.split_whitespace().skip(1).collect::<Vec<_>>(), ["1.00"; 4]);
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["run", "eval-ap", "eval-gas", "proto-encode", "proto-decode", "serve"] {
        let o = run(&[sub, "--help"]);
        assert!(o.status.success(), "{sub}");
        assert!(stdout(&o).contains("Usage"), "{sub}");
    }
    assert!(run(&["--help"]).status.success());
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn protocol_round_trip() {
    let o = run(&["proto-encode", "--token", "G", "--seq", "0"]);
    assert_eq!(stdout(&o), "a5 00 47 5a\n");
    let o = run(&["proto-encode", "--token", "R", "--seq", "200"]);
    let hex: Vec<String> = stdout(&o).split_whitespace().map(String::from).collect();
    let mut args = vec!["proto-decode"];
    args.extend(hex.iter().map(String::as_str));
    assert_eq!(stdout(&run(&args)), "token=R seq=200\n");
    let o = run(&["proto-decode", "a5", "00", "47", "5b"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn second_server_on_a_port_fails() {
    let scenario = fixture("kitchen.json");
    let mut first = bin()
        .args(["serve", "--scenario", scenario.to_str().unwrap(), "--port", "0"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(first.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let port = line.trim().rsplit(':').next().unwrap().to_string();
    assert!(line.starts_with("listening on"), "{line}");
    let o = run(&["serve", "--scenario", scenario.to_str().unwrap(), "--port", &port]);
    first.kill().unwrap();
    first.wait().unwrap();
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}
