use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_tabgfm");

fn tabgfm(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("TABGFM_ENDPOINT").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let o = tabgfm(&["synth", "--out", data.to_str().unwrap(), "--nodes", "120", "--p-in", "0.15", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    data
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn synth_then_run_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let cfg = write_config(
        tmp.path(),
        r#"{"dataset": "data", "seeds": [0, 1], "num_tables": 2, "output": "out/report.json"}"#,
    );
    let o = tabgfm(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("B=2  mean"));
    let r = report(&tmp.path().join("out/report.json"));
    assert_eq!(r["seeds"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(tmp.path().join("out/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_key = write_config(tmp.path(), r#"{"dataset": "data", "num_tabels": 3}"#);
    assert_eq!(tabgfm(&["run", "--config", bad_key.to_str().unwrap()]).status.code(), Some(2));
    let missing = tmp.path().join("absent.json");
    assert_eq!(tabgfm(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    let no_data = write_config(tmp.path(), r#"{"dataset": "nowhere"}"#);
    assert_eq!(tabgfm(&["run", "--config", no_data.to_str().unwrap()]).status.code(), Some(1));
    let bad_p = tabgfm(&["synth", "--out", tmp.path().join("x").to_str().unwrap(), "--p-in", "1.5"]);
    assert_eq!(bad_p.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_report_per_b() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let cfg = write_config(tmp.path(), r#"{"dataset": "data", "seeds": [0], "output": "sweep.json"}"#);
    let o = tabgfm(&["sweep-b", "--config", cfg.to_str().unwrap(), "--b", "0,2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let b0 = report(&tmp.path().join("sweep_b0.json"));
    let b2 = report(&tmp.path().join("sweep_b2.json"));
    assert_eq!(b0["seeds"][0]["predictors"].as_array().unwrap().len(), 7);
    assert_eq!(b2["seeds"][0]["predictors"].as_array().unwrap().len(), 9);
}

#[test]
fn encode_dumps_table() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let cfg = write_config(tmp.path(), r#"{"dataset": "data", "encoders": {"rwpe_steps": 5, "lap_k": 4}}"#);
    let out = tmp.path().join("table");
    let o = tabgfm(&["encode", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let width = 16 * 5 + 5 + 4;
    assert_eq!(std::fs::metadata(out.join("table.bin")).unwrap().len(), (120 * width * 4) as u64);
    let cols: serde_json::Value = report(&out.join("columns.json"));
    assert_eq!(cols.as_array().unwrap().len(), width);
    assert_eq!(cols[0]["kind"], "feature");
    assert_eq!(cols[width - 1]["block"], "lappe");
    let rows = report(&out.join("rows.json"));
    assert_eq!(rows["labeled"].as_array().unwrap().len(), rows["labels"].as_array().unwrap().len());
}

#[test]
fn selftest_passes() {
    let o = tabgfm(&["selftest"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    for suite in ["encoders", "ridge", "selection", "subsample-ecoc", "learners"] {
        assert!(text.lines().any(|l| l.starts_with(suite) && l.ends_with("pass")), "{text}");
    }
}

#[test]
fn echo_bridge_answers_per_line() {
    let mut child = Command::new(BIN)
        .arg("echo-bridge")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let ok = r#"{"id":"a","seed":1,"num_classes":3,"context":{"rows":[[0.5],[1.5]],"labels":[0,2]},"query":{"rows":[[1.0],[2.0]]}}"#;
    let too_many = r#"{"id":"b","seed":1,"num_classes":11,"context":{"rows":[[0.5]],"labels":[0]},"query":{"rows":[[1.0]]}}"#;
    {
        let mut stdin = child.stdin.take().unwrap();
        writeln!(stdin, "{ok}\n{too_many}\n{ok}").unwrap();
    }
    let out = child.wait_with_output().unwrap();
    let lines: Vec<serde_json::Value> =
        stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["id"], "a");
    assert_eq!(lines[0]["probs"].as_array().unwrap().len(), 2);
    assert_eq!(lines[1], serde_json::json!({"id": "b", "error": "limits"}));
    assert_eq!(lines[0], lines[2]);
}

#[test]
fn external_stdio_backend_through_echo_bridge() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let body = format!(
        r#"{{"dataset": "data", "seeds": [0], "num_tables": 3, "output": "out/r.json",
            "backend": {{"kind": "external", "endpoint": "stdio:{BIN} echo-bridge", "timeout_secs": 30}}}}"#
    );
    let cfg = write_config(tmp.path(), &body);
    let run = || {
        let o = tabgfm(&["run", "--config", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut r = report(&tmp.path().join("out/r.json"));
        r.as_object_mut().unwrap().remove("timings");
        r
    };
    let first = run();
    assert!(first["skipped"].as_array().unwrap().is_empty());
    let ids: Vec<&str> = first["seeds"][0]["predictors"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(ids.contains(&"tfm/2"), "{ids:?}");
    assert_eq!(first, run());
}

#[test]
fn endpoint_env_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let cfg = write_config(
        tmp.path(),
        r#"{"dataset": "data", "seeds": [0], "num_tables": 2, "output": "r.json",
            "backend": {"kind": "external", "endpoint": "http://127.0.0.1:1", "timeout_secs": 5}}"#,
    );
    let o = Command::new(BIN)
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("TABGFM_ENDPOINT", format!("stdio:{BIN} echo-bridge"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(report(&tmp.path().join("r.json"))["skipped"].as_array().unwrap().is_empty());

    let o = tabgfm(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(report(&tmp.path().join("r.json"))["skipped"].as_array().unwrap().len(), 2);
}
