use std::process::Command;

fn gridpinn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridpinn"))
}

#[test]
fn case_validate_reports_convergence() {
    let out = gridpinn().args(["case", "validate", "ieee14"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("14 buses") && text.contains("converged=true"), "{text}");
}

#[test]
fn exit_codes_follow_the_failing_stage() {
    let missing = gridpinn().args(["case", "validate", "no/such/case.txt"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let unknown = gridpinn().args(["attack", "--scenario", "S99.9"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Config"));
}

#[test]
fn report_dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bundle");
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        r#"
        scenario = "S5.1"
        seeds = [0, 1, 2, 3, 4]
        [hpo]
        step = 0.25
        trials = 4
        "#,
    )
    .unwrap();
    let status = gridpinn()
        .args(["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "report", "--dry-run"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(!out.exists());

    std::fs::write(&cfg, "scenario = \"S5.1\"\n").unwrap();
    let status = gridpinn().args(["--config", cfg.to_str().unwrap(), "report", "--dry-run"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn attack_writes_clean_and_attacked_sets() {
    let dir = tempfile::tempdir().unwrap();
    let status = gridpinn()
        .args(["--out", dir.path().to_str().unwrap(), "--seed", "2", "attack", "--scenario", "S5.1"])
        .status()
        .unwrap();
    assert!(status.success());
    let clean = std::fs::read_to_string(dir.path().join("test_clean.csv")).unwrap();
    let attacked = std::fs::read_to_string(dir.path().join("test_attacked.csv")).unwrap();
    assert_eq!(clean.lines().count(), attacked.lines().count());
    assert_ne!(clean, attacked);
}
