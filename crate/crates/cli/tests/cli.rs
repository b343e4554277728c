use std::process::Command;

fn convshare() -> Command {
    Command::new(env!("CARGO_BIN_EXE_convshare"))
}

fn stdout_f64(args: &[&str]) -> f64 {
    let out = convshare().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().trim().parse().unwrap()
}

#[test]
fn scalar_evaluators() {
    // Ψ(1) = e·E1(1).
    assert!((stdout_f64(&["psi", "1"]) - 0.596_347_362_323_194).abs() < 1e-12);
    assert!((stdout_f64(&["outage", "1"]) - 0.720_27).abs() < 1e-4);
    let out = convshare().args(["outage", "--", "-1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 1\nn_trials = 1000\nschemes = [\"ocr\", \"nocr\"]\n[sweep]\nvariable = \"snr_pu_db\"\nvalues = [10.0, 20.0]\n",
    )
    .unwrap();
    let out = dir.path().join("run.csv");
    let status = convshare()
        .args(["--threads", "1", "sweep", "--config"])
        .arg(&cfg)
        .args(["--trials", "200", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(14) == Some("200")));
    let manifest = std::fs::read_to_string(dir.path().join("run.manifest.json")).unwrap();
    assert!(manifest.contains("\"n_trials\": 200"));
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n_trials = 10\n[sweep]\nvariable = \"snr_pu_db\"\nvalues = [10.0]\n").unwrap();
    let out = convshare().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_trials"));
}

#[test]
fn validate_flags_a_short_prefix() {
    let out = convshare()
        .args(["validate", "--shorten-cp", "--trials", "2000", "--frames", "20", "--search-points", "1000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("[FAIL]") && l.contains("equivalence")), "{text}");
}
