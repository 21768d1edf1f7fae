use std::fs;
use std::path::Path;

use truthful_agg::engine::CSV_HEADER;
use truthful_agg::harness::{
    misreported_demand, resolve_output_dir, run_convergence_experiment, run_robustness_experiment,
    run_truthfulness_experiment, ErrorMetric, ExperimentConfig, ExperimentKind,
    MANIFEST_FILE, OUTPUT_ENV,
};
use truthful_agg::problems::SyntheticKind;

fn read_rows(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap()).collect();
    (header, rows)
}

fn small_convergence() -> ExperimentConfig {
    let mut c = ExperimentConfig::template(ExperimentKind::Convergence);
    c.horizon = 1_000;
    c.stride = 50;
    c.seeds = vec![0, 1];
    c
}

#[test]
fn convergence_artifacts_follow_the_contract() {
    let c = small_convergence();
    let dir = tempfile::tempdir().unwrap();
    run_convergence_experiment(&c, dir.path()).unwrap();
    for f in ["metrics.csv", "curve.svg", MANIFEST_FILE, "summary.toml"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let (header, rows) = read_rows(&dir.path().join("metrics.csv"));
    assert_eq!(header.join(","), CSV_HEADER);
    assert_eq!(rows.len() as u64, c.horizon / c.stride + 1);
    for r in &rows {
        for field in r.iter().filter(|f| !f.is_empty()) {
            let v: f64 = field.parse().unwrap();
            assert!(v.is_finite());
        }
    }
    let svg = fs::read_to_string(dir.path().join("curve.svg")).unwrap();
    assert!(svg.starts_with("<svg"));

    let manifest: toml::Table =
        toml::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str(), Some(c.hash().as_str()));
    assert!(manifest["artifacts"].as_table().unwrap().contains_key("metrics.csv"));
}

#[test]
fn config_hash_tracks_every_field() {
    let a = small_convergence();
    let mut b = a.clone();
    assert_eq!(a.hash(), b.hash());
    b.topology.weight = 0.11;
    assert_ne!(a.hash(), b.hash());
    let mut c = a.clone();
    c.schedules.noise = false;
    assert_ne!(a.hash(), c.hash());
    let round = ExperimentConfig::from_toml(&a.to_toml()).unwrap();
    assert_eq!(round.hash(), a.hash());
}

#[test]
fn output_dir_env_override() {
    let c = small_convergence();
    std::env::set_var(OUTPUT_ENV, "/tmp/elsewhere");
    assert_eq!(resolve_output_dir(&c), Path::new("/tmp/elsewhere"));
    std::env::remove_var(OUTPUT_ENV);
    assert_eq!(resolve_output_dir(&c), c.output_dir);
}

#[test]
fn noise_free_error_not_above_noisy() {
    let mut c = ExperimentConfig::template(ExperimentKind::Convergence);
    c.horizon = 100_000;
    c.stride = 10_000;
    let noisy = run_convergence_experiment(&c, tempfile::tempdir().unwrap().path()).unwrap();
    c.schedules.noise = false;
    let clean = run_convergence_experiment(&c, tempfile::tempdir().unwrap().path()).unwrap();
    let (n, f) = (noisy.mean_final.unwrap(), clean.mean_final.unwrap());
    assert!(f <= n, "noise-free {f} vs noisy {n}");
    // Measured ratio is about 47 at this horizon.
    assert!(n < 100.0 * f, "noisy {n} vs noise-free {f}");
}

#[test]
fn nonconvex_weighted_average_decreases_across_checkpoints() {
    let mut c = ExperimentConfig::template(ExperimentKind::Convergence);
    c.problem.synthetic_kind = SyntheticKind::Nonconvex;
    c.schedules.preset = "corollary1-ncvx".into();
    c.convergence.metric = ErrorMetric::GradNorm;
    c.horizon = 100_000;
    c.stride = 1_000;
    let s = run_convergence_experiment(&c, tempfile::tempdir().unwrap().path()).unwrap();
    let at = |t: u64| s.mean.iter().find(|r| r.t == t).unwrap().weighted_avg_grad;
    let (a, b, d) = (at(1_000), at(10_000), at(100_000));
    assert!(a > b && b > d, "{a} {b} {d}");
}

fn small_robustness() -> ExperimentConfig {
    let mut c = ExperimentConfig::template(ExperimentKind::Robustness);
    c.horizon = 4_000;
    c.stride = 4_000;
    c.seeds = vec![0, 1];
    c.robustness.ratio_from = 0;
    c
}

#[test]
fn without_noise_both_algorithms_agree() {
    let mut c = small_robustness();
    c.robustness.noise_preset = "sec5-convergence".into();
    c.schedules.noise = false;
    let dir = tempfile::tempdir().unwrap();
    let s = run_robustness_experiment(&c, dir.path()).unwrap();
    let (a, b) = (s.mean_algorithm1.last().unwrap(), s.mean_baseline.last().unwrap());
    let (ga, gb) = (a.gap_f.unwrap(), b.gap_f.unwrap());
    let f_a = final_cost(&c, &s);
    let rel = ((ga - gb) / f_a).abs();
    assert!(rel < 0.01, "final F differ by {rel}");
    let (header, rows) = read_rows(&dir.path().join("verdicts.csv"));
    assert_eq!(header, ["seed", "algorithm", "diverged", "ratio", "final_metric", "flagged"]);
    assert_eq!(rows.len(), 4);
}

fn final_cost(c: &ExperimentConfig, s: &truthful_agg::harness::RobustnessSummary) -> f64 {
    let inst = c.build_problem().unwrap();
    let f_star = truthful_agg::problems::centralized_oracle(inst.as_dyn(), &Default::default()).value;
    f_star + s.mean_algorithm1.last().unwrap().gap_f.unwrap()
}

#[test]
fn tracker_noise_barely_moves_the_final_cost() {
    let mut c = small_robustness();
    c.robustness.noise_preset = "sec5-convergence".into();
    let noisy = run_robustness_experiment(&c, tempfile::tempdir().unwrap().path()).unwrap();
    let mut quiet = c.clone();
    quiet.schedules.noise = false;
    let clean = run_robustness_experiment(&quiet, tempfile::tempdir().unwrap().path()).unwrap();
    let (n, f) = (final_cost(&c, &noisy), final_cost(&quiet, &clean));
    assert!(((n - f) / f).abs() < 0.05, "noisy F {n} vs noise-free {f}");
}

fn small_truthfulness() -> ExperimentConfig {
    let mut c = ExperimentConfig::template(ExperimentKind::Truthfulness);
    c.horizon = 500;
    c.seeds = vec![0, 1];
    c.truthfulness.groups = vec![2];
    c
}

#[test]
fn gains_table_schema() {
    let c = small_truthfulness();
    let dir = tempfile::tempdir().unwrap();
    let s = run_truthfulness_experiment(&c, dir.path()).unwrap();
    let (header, rows) = read_rows(&dir.path().join("group-2/gains.csv"));
    assert_eq!(header, ["seed", "gain_alg1", "gain_naive", "eta", "global_inflation"]);
    assert_eq!(rows.len(), 2);
    assert!(dir.path().join("group-2/prices.svg").is_file());
    assert!(s.rows.iter().all(|r| r.gain_alg1 <= r.eta));
}

#[test]
fn truthful_report_gains_nothing() {
    let mut c = small_truthfulness();
    c.truthfulness.shift_fraction = 0.0;
    let s = run_truthfulness_experiment(&c, tempfile::tempdir().unwrap().path()).unwrap();
    for r in &s.rows {
        assert_eq!(r.gain_alg1, 0.0);
        assert_eq!(r.gain_naive, 0.0);
        assert_eq!(r.global_inflation, 0.0);
    }
}

#[test]
fn misreport_moves_mass_across_the_pivot() {
    let d = vec![4.0, 3.0, 2.0, 1.0, 1.0, 2.0];
    let lie = misreported_demand(&d, 3, 0.4).unwrap();
    let before: f64 = lie[..3].iter().sum();
    assert!((before - 0.6 * 9.0).abs() < 1e-12);
    assert!((lie.iter().sum::<f64>() - d.iter().sum::<f64>()).abs() < 1e-12);
}
