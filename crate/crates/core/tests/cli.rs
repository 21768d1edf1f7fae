use std::fs;
use std::process::{Command, Output};

use truthful_agg::harness::{ExperimentConfig, ExperimentKind, OUTPUT_ENV};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_truthful-agg"))
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn print_config_round_trips() {
    for kind in ExperimentKind::ALL {
        let out = bin().args(["run", "--print-config", kind.name()]).output().unwrap();
        assert_eq!(code(&out), 0);
        let parsed = ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(parsed, ExperimentConfig::template(kind));
    }
}

#[test]
fn run_writes_to_env_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::template(ExperimentKind::Convergence);
    c.horizon = 500;
    c.stride = 50;
    c.seeds = vec![0];
    let path = tmp.path().join("conv.toml");
    fs::write(&path, c.to_toml()).unwrap();
    let out_dir = tmp.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&path)
        .env(OUTPUT_ENV, &out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(out_dir.join("metrics.csv").is_file());
    assert!(out_dir.join("manifest.toml").is_file());
}

#[test]
fn validate_graph_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ring = tmp.path().join("ring.txt");
    fs::write(&ring, "0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n").unwrap();
    let ok = bin().arg("validate-graph").arg(&ring).output().unwrap();
    assert_eq!(code(&ok), 0);

    let bad = bin()
        .arg("validate-graph")
        .arg(&ring)
        .args(["--weight", "0.45"])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);

    let broken = tmp.path().join("broken.txt");
    fs::write(&broken, "0 1\n1 x\n").unwrap();
    let err = bin().arg("validate-graph").arg(&broken).output().unwrap();
    assert_eq!(code(&err), 1);
}

#[test]
fn privacy_report_on_literal_preset_fails_the_denominator() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("p.toml");
    fs::write(&path, ExperimentConfig::template(ExperimentKind::PrivacyReport).to_toml()).unwrap();
    let out = bin().arg("privacy-report").arg(&path).output().unwrap();
    assert_eq!(code(&out), 2);

    let mut desk = ExperimentConfig::template(ExperimentKind::PrivacyReport);
    desk.schedules.preset = "truthful-desk".into();
    fs::write(&path, desk.to_toml()).unwrap();
    let out = bin().arg("privacy-report").arg(&path).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn lemma2_reports_status() {
    let out = bin().args(["lemma2", "20", "500"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    let clean = text.matches(": 0 violations").count() == 2;
    assert_eq!(code(&out), if clean { 0 } else { 2 }, "{text}");
}
