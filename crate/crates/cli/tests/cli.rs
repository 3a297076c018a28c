use std::process::Command;

fn dopd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dopd"))
}

#[test]
fn invalid_horizon_exits_with_code_two() {
    let out = dopd().args(["--T", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("T must be at least 1"), "{err}");
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "algo = \"two_point\"\nhorizon = 5\n").unwrap();
    let out = dopd().arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn run_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let out = dopd()
        .args(["--algo", "two-point", "--T", "60", "--n", "4", "--seeds", "1,2", "--stride", "20"])
        .env("DOPD_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("regret order: two_point"), "{stdout}");
    let csvs: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    assert_eq!(csvs.len(), 2);
    assert!(std::fs::read_dir(dir.path())
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().starts_with("summary_two_point")));
    let out = dopd().arg("summarize").args(&csvs).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("two_point"));
}

#[test]
fn show_config_prints_resolved_toml() {
    let out = dopd().args(["show-config", "--algo", "one-point", "--n", "7"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("algo = \"one_point\""), "{text}");
    assert!(text.contains("n = 7"));
}
