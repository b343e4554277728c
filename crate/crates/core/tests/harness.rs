use convshare::harness::{emit_csv, manifest_path, read_csv, run_sweep, write_csv, write_manifest, Manifest, SweepConfig, CSV_HEADER};

fn grid_config() -> SweepConfig {
    SweepConfig::from_toml(
        r#"
        seed = 42
        n_trials = 300
        csit_mode = "nocsit"
        [scenario]
        snr_db = 15.0
        [sweep]
        variable = "d12_ratio"
        values = [0.3, 0.5, 0.7]
        [series]
        variable = "power_ratio"
        values = [0.5, 1.0]
        "#,
    )
    .unwrap()
}

#[test]
fn one_row_per_series_point_and_scheme() {
    let cfg = grid_config();
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.rows.len(), 2 * 3 * 4);
    assert_eq!(out.manifest.points.len(), 6);
    assert!(out.rows.iter().all(|r| r.series_var.as_deref() == Some("power_ratio") && r.sweep_var == "d12_ratio"));
    assert!(out.rows.iter().all(|r| r.n_trials == 300));
    let d = out.manifest.derived;
    assert_eq!((d.m, d.l_su, d.l_cp, d.p, d.q, d.m_vc, d.n_streams), (64, 10, 16, 80, 60, 4, 7));
}

#[test]
fn csv_round_trips() {
    let out = run_sweep(&grid_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    emit_csv(&path, &out.rows).unwrap();
    assert_eq!(read_csv(&path).unwrap(), out.rows);
}

#[test]
fn empty_and_single_row_tables() {
    let mut buf = Vec::new();
    write_csv(&mut buf, &[]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.trim_end(), CSV_HEADER.join(","));

    let cfg = SweepConfig::from_toml(
        r#"
        n_trials = 100
        schemes = ["ocr"]
        [sweep]
        variable = "snr_pu_db"
        values = [20.0]
        "#,
    )
    .unwrap();
    let out = run_sweep(&cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &out.rows).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
}

#[test]
fn fixed_seed_reproduces_bytes() {
    let cfg = grid_config();
    let bytes = || {
        let mut buf = Vec::new();
        write_csv(&mut buf, &run_sweep(&cfg).unwrap().rows).unwrap();
        buf
    };
    assert_eq!(bytes(), bytes());
    let mut other = cfg.clone();
    other.seed = 43;
    let mut buf = Vec::new();
    write_csv(&mut buf, &run_sweep(&other).unwrap().rows).unwrap();
    assert_ne!(buf, bytes());
}

#[test]
fn manifest_records_the_run() {
    let cfg = grid_config();
    let out = run_sweep(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig.csv");
    let path = manifest_path(&csv);
    assert_eq!(path.file_name().unwrap(), "fig.manifest.json");
    write_manifest(&path, &out.manifest).unwrap();
    let back: Manifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back.version, env!("CARGO_PKG_VERSION"));
    let seeds: std::collections::HashSet<u64> = back.points.iter().map(|p| p.seed).collect();
    assert_eq!(seeds.len(), back.points.len());
    for p in &back.points {
        assert!((p.d12 - p.sweep_value).abs() <= 1e-12);
        assert!((p.p_su - p.series_value.unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn config_survives_toml_round_trip() {
    let cfg = grid_config();
    assert_eq!(SweepConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
}

#[test]
fn silent_secondary_row_has_no_gain() {
    let cfg = SweepConfig::from_toml(
        r#"
        n_trials = 200
        schemes = ["proposed_with_vcs", "proposed_without_vcs", "nocr"]
        [sweep]
        variable = "power_ratio"
        values = [0.0, 1.0]
        "#,
    )
    .unwrap();
    let out = run_sweep(&cfg).unwrap();
    for r in out.rows.iter().filter(|r| r.sweep_value == 0.0) {
        assert!(r.delta_c_pu.abs() <= 1e-12, "{r:?}");
        assert!(r.c_su_lower.abs() <= 1e-12, "{r:?}");
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = SweepConfig::load(&path).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert_eq!(n, 6);
}
