use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn contmeas(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contmeas")).args(args).arg("--out").arg(out).output().unwrap()
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["rpi-run"][..], &["ensemble", "--n", "10"], &["micro-run"], &["figure3", "--n", "10"]] {
        let out = contmeas(dir.path(), args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    }
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[system]\ne1 = 0.5\ne2 = -0.5\nv = 1.0\nt1 = 0.0\nt2 = 1.0\nt_total = 1.0\n[measurement]\nkappa = 1.0\n",
    )
    .unwrap();
    let out = contmeas(dir.path(), &["rpi-run", "--seed", "1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn rpi_run_from_readout_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rabi.toml");
    fs::write(&cfg, "[system]\ne1 = -0.5\ne2 = 0.5\nv = 3.141592653589793\nt1 = 0.0\nt2 = 0.5\nt_total = 0.5\n[measurement]\nkappa = 0.0\n")
        .unwrap();
    let readout = dir.path().join("readout_in.csv");
    fs::write(&readout, "t,E\n0,0.0\n0.25,0.0\n").unwrap();
    let out =
        contmeas(dir.path(), &["rpi-run", "--config", cfg.to_str().unwrap(), "--readout", readout.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let row: Vec<f64> = summary.lines().nth(1).unwrap().split(',').take(2).map(|s| s.parse().unwrap()).collect();
    assert!((row[0] - 1.0).abs() < 1e-8 && (row[1] - 1.0).abs() < 1e-8);
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"rpi-run\"") && !manifest.contains("seed"));
}

#[test]
fn infeasible_model_exits_2_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.toml");
    // 100 observations over the reference duration: far too coarse for N = 20
    fs::write(&model, "p1 = 0.3\np2 = 0.7\ntau = 0.0058\n").unwrap();
    let m = model.to_str().unwrap();
    let out = contmeas(dir.path(), &["micro-run", "--seed", "1", "--model", m]);
    assert_eq!(out.status.code(), Some(2));
    let report = fs::read_to_string(dir.path().join("feasibility.txt")).unwrap();
    assert!(report.contains("FAIL"));
    assert!(!dir.path().join("readout.csv").exists());

    let out = contmeas(dir.path(), &["micro-run", "--seed", "1", "--model", m, "--force"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let readout = fs::read_to_string(dir.path().join("readout.csv")).unwrap();
    assert!(readout.starts_with("t,n,E\n"));
    assert_eq!(readout.lines().count(), 1 + 5);
}

#[test]
fn compare_needs_counts_with_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.toml");
    fs::write(&model, "p1 = 0.49\np2 = 0.51\ntau = 0.001\n").unwrap();
    let out = contmeas(dir.path(), &["compare", "--model", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = contmeas(dir.path(), &["compare"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("equivalence.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn validate_passes_and_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = contmeas(dir.path(), &["validate", "--cross-n", "500"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    assert!(csv.starts_with("check,value,threshold,passed"));
    assert!(!csv.contains(",false"));
}

#[test]
fn figure2_writes_selection_densities() {
    let dir = tempfile::tempdir().unwrap();
    let out = contmeas(dir.path(), &["figure2", "--seed", "3", "--n", "200"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("figure2_density_e.csv")).unwrap();
    for sel in ["all", "transition", "no_transition"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("{sel},"))));
    }
}
