use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gpbo_cli::run::RunReport;
use gpbo_cli::triallog::read_trial_log;

fn gpbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpbo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: serde_json::Value) -> PathBuf {
    let p = dir.join("cfg.json");
    fs::write(&p, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    p
}

fn command_config(script: &str, trials: usize) -> serde_json::Value {
    serde_json::json!({
        "space": [
            {"type": "range", "name": "x", "bounds": [0, 1]},
            {"type": "choice", "name": "act", "values": ["relu", "tanh"]}
        ],
        "objective": {"command": {"program": "sh", "args": ["-c", script], "timeout_s": 2}},
        "total_trials": trials
    })
}

#[test]
fn builtin_run_writes_both_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        serde_json::json!({
            "space": [{"type": "range", "name": "x", "bounds": [0, 1]}],
            "objective": {"builtin": {"name": "quadratic1d"}},
            "out_dir": out.to_str().unwrap()
        }),
    );
    let o = gpbo(&["run", cfg.to_str().unwrap(), "--trials", "8", "--seed", "4"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let csv = fs::read_to_string(out.join("trials.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial_index,generator,x,objective,sem,status,elapsed_ms"
    );
    assert_eq!(lines.count(), 8);

    let report: RunReport =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!((report.n_trials, report.n_failed, report.seed), (8, 0, 4));
    let rows = read_trial_log(&out.join("trials.csv")).unwrap();
    let best_logged = rows
        .iter()
        .filter_map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best_logged, report.observed_objective);
    assert!(rows.iter().all(|r| r.elapsed_ms == 0));
}

#[test]
fn config_errors_exit_2_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let cases = [
        serde_json::json!({
            "space": [{"type": "range", "name": "x", "bounds": [0, 1]}],
            "objective": {"builtin": {"name": "quadratic1d"}},
            "out_dir": out.to_str().unwrap(),
            "seeed": 3
        }),
        serde_json::json!({
            "space": [{"type": "range", "name": "x", "bounds": [2, 1]}],
            "objective": {"builtin": {"name": "quadratic1d"}},
            "out_dir": out.to_str().unwrap()
        }),
        serde_json::json!({
            "space": [{"type": "range", "name": "y", "bounds": [0, 1]}],
            "objective": {"builtin": {"name": "quadratic1d"}},
            "out_dir": out.to_str().unwrap()
        }),
    ];
    for body in cases {
        let cfg = write_config(dir.path(), body);
        let o = gpbo(&["run", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2));
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
        assert!(!out.exists());
        assert_eq!(
            gpbo(&["validate", cfg.to_str().unwrap()]).status.code(),
            Some(2)
        );
    }
    let missing = dir.path().join("nope.json");
    assert_eq!(
        gpbo(&["run", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    fs::write(dir.path().join("broken.json"), "{\"space\": [").unwrap();
    let o = gpbo(&["run", dir.path().join("broken.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = gpbo(&["run", missing.to_str().unwrap(), "--trials", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), command_config("true", 5));
    let o = gpbo(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok"));
}

#[test]
fn subprocess_protocol_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    // echo back a value derived from the request so the test sees it was read
    let script = r#"req=$(cat); sleep 0.02; case "$req" in *'"act":"relu"'*) echo '{"objective": 1.0, "sem": 0.5}';; *) echo '{"objective": 2.0, "sem": 0.5}';; esac"#;
    let cfg = write_config(dir.path(), command_config(script, 6));
    let o = gpbo(&[
        "run",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows = read_trial_log(&out.join("trials.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let act = &r.params.iter().find(|(n, _)| n == "act").unwrap().1;
        let want = if act == "relu" { 1.0 } else { 2.0 };
        assert_eq!(r.objective, Some(want));
        assert_eq!(r.sem, Some(0.5));
        assert!(r.elapsed_ms >= 15, "{}", r.elapsed_ms);
    }
}

#[test]
fn evaluator_faults_fail_trials_and_exit_1() {
    for (script, _kind) in [
        ("cat >/dev/null; exit 3", "nonzero_exit"),
        ("cat >/dev/null; echo not-json", "malformed_output"),
        ("sleep 10", "timeout"),
    ] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let mut body = command_config(script, 2);
        body["objective"]["command"]["timeout_s"] = serde_json::json!(0.3);
        let cfg = write_config(dir.path(), body);
        let o = gpbo(&[
            "run",
            cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(1), "{script}");
        let rows = read_trial_log(&out.join("trials.csv")).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.status == "FAILED" && r.objective.is_none()));
        assert!(!out.join("report.json").exists());
    }
}

#[test]
fn bench_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    let o = gpbo(&[
        "bench",
        "branin2d",
        "--trials",
        "6",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("report.json").exists());
    assert_eq!(gpbo(&["bench", "nonesuch"]).status.code(), Some(2));
}
