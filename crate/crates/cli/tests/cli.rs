use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use argverify_core::contestation::{ContestAction, EditPayload};
use argverify_core::{run_pipeline, CasePackage, ClaimKind, ContestationSession, PipelineConfig, ProviderSet};
use serde_json::Value;

fn core_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core")
}

fn fixture_path() -> PathBuf {
    core_dir().join("fixtures/id01_case.json")
}

fn argverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_argverify"))
        .args(args)
        .env_remove("ARGVERIFY_PROVIDERS")
        .env_remove("ARGVERIFY_PROVIDER_BASE_URL")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn verify_writes_result_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out/id01.json");
    let o = argverify(&["verify", "--case", p(&fixture_path()), "--providers", "mock", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("overall: Debunked"));
    let result = std::fs::read_to_string(&out).unwrap();
    let golden = std::fs::read_to_string(core_dir().join("tests/golden/id01_result.json")).unwrap();
    assert_eq!(result, golden);
    let md = std::fs::read_to_string(dir.path().join("out/id01.md")).unwrap();
    let golden_md = std::fs::read_to_string(core_dir().join("tests/golden/id01_report.md")).unwrap();
    assert_eq!(md, golden_md);

    // byte-stable across runs
    let again = dir.path().join("again.json");
    assert_eq!(argverify(&["verify", "--case", p(&fixture_path()), "--out", p(&again)]).status.code(), Some(0));
    assert_eq!(std::fs::read(&again).unwrap(), result.as_bytes());
}

#[test]
fn malformed_case_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut case: Value = serde_json::from_str(&std::fs::read_to_string(fixture_path()).unwrap()).unwrap();
    case["evidence"][2]["trust_hint"] = Value::String("high".into());
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, case.to_string()).unwrap();
    let out = dir.path().join("r.json");
    let o = argverify(&["verify", "--case", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("evidence[2].trust_hint"), "{}", stderr(&o));
    assert!(!out.exists());

    case["evidence"][2]["trust_hint"] = Value::from(0.5);
    case["case_id"] = Value::String(" ".into());
    std::fs::write(&bad, case.to_string()).unwrap();
    let o = argverify(&["verify", "--case", p(&bad), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("case_id non-empty"), "{}", stderr(&o));

    std::fs::write(&bad, "{\"case_id\": \"x\"").unwrap();
    assert_eq!(argverify(&["verify", "--case", p(&bad), "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn unreachable_remote_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("argverify.toml");
    std::fs::write(
        &cfg,
        "[providers.remote]\nbase_url = \"http://127.0.0.1:9\"\nmax_attempts = 1\ntimeout_ms = 200\nbackoff_base_ms = 1\n",
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let o = argverify(&["verify", "--case", p(&fixture_path()), "--config", p(&cfg), "--providers", "remote", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("provider"), "{}", stderr(&o));
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("argverify.toml");
    std::fs::write(&cfg, "[pipeline]\nk = 0\n").unwrap();
    let o = argverify(&["verify", "--case", p(&fixture_path()), "--config", p(&cfg), "--out", p(&dir.path().join("r.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k must be at least 1"), "{}", stderr(&o));
}

fn write_session(dir: &Path, actions: bool) -> PathBuf {
    let case: CasePackage = serde_json::from_str(&std::fs::read_to_string(fixture_path()).unwrap()).unwrap();
    let result = run_pipeline(&case, &PipelineConfig::default(), &ProviderSet::mock()).unwrap();
    let mut session = ContestationSession::new("sess", result);
    if actions {
        let at = "2025-06-01T12:00:00Z".parse().unwrap();
        session = session
            .apply_action(ContestAction::reject(ClaimKind::Authenticity, "authenticity-04").by("ana", "a1", at))
            .unwrap()
            .apply_action(
                ContestAction::edit(ClaimKind::When, "when-01", EditPayload { new_tau: Some(0.3), ..Default::default() })
                    .by("ana", "a2", at),
            )
            .unwrap();
    }
    let path = dir.join(if actions { "session.json" } else { "empty.json" });
    std::fs::write(&path, session.to_json()).unwrap();
    path
}

#[test]
fn replay_accepts_untampered_sessions() {
    let dir = tempfile::tempdir().unwrap();
    for actions in [false, true] {
        let path = write_session(dir.path(), actions);
        let o = argverify(&["replay", "--session", p(&path)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).starts_with(&format!("replay ok: {} action(s)", if actions { 2 } else { 0 })));
    }
}

#[test]
fn hand_edited_sigma_exits_4_with_section() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_session(dir.path(), true);
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["current"]["sections"]["when"]["sigma"] = Value::from(0.9);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let o = argverify(&["replay", "--session", p(&path)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("first divergent section: when"), "{}", stderr(&o));
}

#[test]
fn report_renders_from_a_session() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_session(dir.path(), true);
    let o = argverify(&["report", "--session", p(&path)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let md = stdout(&o);
    assert!(md.contains("0.500000"));
    assert!(md.contains("a2"));
    let out = dir.path().join("report.json");
    assert_eq!(argverify(&["report", "--session", p(&path), "--format", "json", "--out", p(&out)]).status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["contest_log"].as_array().unwrap().len(), 2);
    // exactly one input
    assert_eq!(argverify(&["report"]).status.code(), Some(2));
    assert_eq!(argverify(&["report", "--session", p(&path), "--result", p(&path)]).status.code(), Some(2));
}

#[test]
fn fuzz_passes_on_the_real_evaluator() {
    let o = argverify(&["fuzz", "--nodes", "12", "--graphs", "1000", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("1000 graph(s) checked"));
    let o = argverify(&["fuzz", "--nodes", "12", "--graphs", "0", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 graph(s) checked"));
    assert_eq!(argverify(&["fuzz", "--nodes", "65", "--graphs", "1"]).status.code(), Some(2));
}

#[test]
fn fuzz_catches_a_broken_evaluator() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("cx.json");
    let o = argverify(&["fuzz", "--nodes", "12", "--graphs", "10", "--seed", "1", "--inject-fault", "--dump", p(&dump)]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stderr(&o).contains(p(&dump)), "{}", stderr(&o));
    let cx: Value = serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(cx["seed"], 1);
    assert!(!cx["violations"].as_array().unwrap().is_empty());
    assert!(cx["graph"]["claim"].is_object());
}

#[test]
fn unknown_flags_are_errors_and_help_lists_exit_codes() {
    let o = argverify(&["verify", "--case", "x.json", "--out", "y.json", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--frobnicate"));
    let help = argverify(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    for needle in ["Exit codes:", "4  replay divergence", "5  fuzz property violation"] {
        assert!(stdout(&help).contains(needle), "{needle}");
    }
    assert!(!stdout(&argverify(&["fuzz", "--help"])).contains("inject-fault"));
}

#[test]
fn serve_answers_health_checks() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_argverify"))
        .args(["serve", "--listen", "127.0.0.1:0"])
        .env("ARGVERIFY_STORE_PATH", dir.path())
        .env_remove("ARGVERIFY_API_TOKEN")
        .stderr(Stdio::piped())
        .stdout(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("serve exited early").unwrap();
        if let Some(rest) = line.strip_prefix("argverify listening on http://") {
            break rest.trim().to_owned();
        }
    };
    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    assert!(resp.contains("\"status\": \"ok\""));
    assert!(dir.path().join("case").is_dir());
}
