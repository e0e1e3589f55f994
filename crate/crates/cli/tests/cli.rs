use std::path::Path;
use std::process::{Command, Output};

fn transmigrate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_transmigrate")).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write_config(dir: &Path, backend: bool) -> String {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/sample-app");
    let mut cfg = serde_json::json!({
        "project": "cli",
        "source_root": fixture.join("app"),
        "output_root": dir.join("out"),
        "knowledge": {"enabled": false},
    });
    if backend {
        cfg["backend"] = serde_json::json!({"name": "mock", "mock_rules": fixture.join("mock_rules.json")});
    }
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn stub_syntax_check_reports_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("A.swift");
    std::fs::write(&file, "class A {\n    let x = new Foo()\n").unwrap();
    let out = transmigrate(&["stub-check", "syntax", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("A.swift:1:9: error: expected '}' to match this '{'"), "{stdout}");
    assert!(stdout.contains("A.swift:2:13: error:"), "{stdout}");

    std::fs::write(&file, "class A {}\n").unwrap();
    assert!(transmigrate(&["stub-check", "lint", file.to_str().unwrap()]).status.success());
}

#[test]
fn config_without_backend_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), false);
    let out = transmigrate(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("no `backend` section"), "{}", text(&out.stderr));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn stages_run_individually_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), true);
    let out = transmigrate(&["plan", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("analyze"), "{}", text(&out.stderr));
    for stage in ["analyze", "index", "plan", "translate", "validate", "report"] {
        let out = transmigrate(&[stage, "--config", &cfg]);
        assert!(out.status.success(), "{stage}: {}", text(&out.stderr));
    }
    let md = std::fs::read_to_string(dir.path().join("out/report.md")).unwrap();
    assert!(md.starts_with("# Translation results"));

    // a different seed is a different run and must not reuse the state
    let out = transmigrate(&["report", "--config", &cfg, "--seed", "9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("--fresh"));
}

#[test]
fn interrupted_run_exits_with_a_distinct_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), true);
    let out = transmigrate(&["run", "--config", &cfg, "--halt-after", "2"]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
    let out = transmigrate(&["run", "--config", &cfg]);
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("2 resumed"), "{}", text(&out.stdout));
}
