use std::process::Command;

use vlasov_stokes::config::SimConfig;
use vlasov_stokes::snapshot::{read_snapshot, FieldKind};

fn vstokes() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vstokes"))
}

#[test]
fn run_writes_snapshots_diagnostics_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SimConfig::default();
    cfg.time.t_final = 0.02;
    cfg.output.stride = 10;
    let config = dir.path().join("case.cfg");
    std::fs::write(&config, cfg.to_text()).unwrap();
    let out = dir.path().join("out");
    let status = vstokes().arg("run").arg("--config").arg(&config).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());

    let f = read_snapshot(&out.join("f_00002.vsg")).unwrap();
    assert_eq!(f.header.kind, FieldKind::Distribution);
    assert!((f.header.time - 0.02).abs() < 1e-12);
    let u = read_snapshot(&out.join("u_00000.vsg")).unwrap();
    assert_eq!(u.header.kind, FieldKind::Velocity);
    assert!(!out.join("f_00003.vsg").exists());

    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(csv.lines().count() > 1);
    assert!(!csv.contains(",false"), "{csv}");
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("steps"));
}

#[test]
fn unknown_suite_and_bad_config_fail() {
    let dir = tempfile::tempdir().unwrap();
    let status = vstokes().args(["verify", "--suite", "nonesuch", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let config = dir.path().join("bad.cfg");
    std::fs::write(&config, "grid.n_x = 12\n").unwrap();
    let status = vstokes().arg("run").arg("--config").arg(&config).status().unwrap();
    assert_eq!(status.code(), Some(2));
}
