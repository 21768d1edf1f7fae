//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line
//! and then asserts it.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{epsilon_256, BudgetInputs};
use truthful_agg::engine::{init_run, RunOptions};
use truthful_agg::harness::{
    check_gradients, check_lemma2_bounds, run_convergence_experiment, run_robustness_experiment,
    run_truthfulness_experiment, ExperimentConfig, ExperimentKind, ProblemFamily,
};
use truthful_agg::privacy::{calibrate_noise, epsilon, Horizon, Lemma2Part};
use truthful_agg::problems::{aggregate, SyntheticKind};
use truthful_agg::schedules::ScheduleSet;

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Noise-free desk EV config for the engine-level criteria.
fn desk_ev(preset: &str, noise: bool) -> ExperimentConfig {
    let mut c = ExperimentConfig::template(ExperimentKind::Robustness);
    c.schedules.preset = preset.into();
    c.schedules.noise = noise;
    c
}

#[test]
fn criterion_1_exact_invariants() {
    let start = Instant::now();
    let config = desk_ev("sec5-convergence", false);
    let instance = config.build_problem().unwrap();
    let problem = instance.as_dyn();
    let w = config.build_weights(0).unwrap();
    let m = problem.num_agents() as f64;
    let mut state = init_run(problem, &w, config.schedule_set().unwrap(), 0, RunOptions::default()).unwrap();
    let (mut worst_agg, mut worst_y) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let trace = state.step().unwrap();
        let x = state.decisions();
        // aggregate() is the mean of g over agents.
        let phi = aggregate(problem, &x);
        let d = phi.len();
        for (k, p) in phi.iter().enumerate() {
            let psi_sum: f64 = state.agents().iter().map(|a| a.psi[k]).sum();
            worst_agg = worst_agg.max((psi_sum - m * p).abs());
        }
        let resid: f64 = (0..d)
            .map(|k| (trace.y_mean_delta[k] - trace.gamma1 * trace.grad2_mean[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        worst_y = worst_y.max(resid);
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        worst_agg <= 1e-8 && worst_y <= 1e-9 && elapsed < Duration::from_secs(30),
        &format!("max aggregate residual {worst_agg:.3e}, max tracker residual {worst_y:.3e}, {elapsed:.1?}"),
    );
}

#[test]
fn criterion_2_ball_containment() {
    let config = desk_ev("sec5-convergence", true);
    let instance = config.build_problem().unwrap();
    let problem = instance.as_dyn();
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..5 {
        let w = config.build_weights(seed).unwrap();
        let mut state =
            init_run(problem, &w, config.schedule_set().unwrap(), seed, RunOptions::default()).unwrap();
        loop {
            let r = state.radius();
            for a in state.agents() {
                let norm = a.y.iter().map(|v| v * v).sum::<f64>().sqrt();
                worst = worst.max(norm - r);
            }
            if state.iteration() == 1000 {
                break;
            }
            state.step().unwrap();
        }
    }
    verdict(2, worst <= 1e-9, &format!("max of |y| - radius over 5 seeds: {worst:.3e}"));
}

#[test]
fn criterion_3_noise_free_oracle_convergence() {
    let start = Instant::now();
    let mut c = ExperimentConfig::template(ExperimentKind::Convergence);
    c.schedules.noise = false;
    c.seeds = vec![0];
    c.horizon = 50_000;
    c.stride = 5_000;
    let dir = tempfile::tempdir().unwrap();
    let s = run_convergence_experiment(&c, dir.path()).unwrap();
    let err = s.mean_final.unwrap();
    let elapsed = start.elapsed();
    verdict(
        3,
        err <= 1e-6 && elapsed < Duration::from_secs(60),
        &format!("|x_T - x*|^2 = {err:.3e} at T = 5e4, {elapsed:.1?}"),
    );
}

#[test]
fn criterion_4_noisy_rate() {
    let start = Instant::now();
    let mut c = ExperimentConfig::template(ExperimentKind::Convergence);
    c.horizon = 100_000;
    c.stride = 1_000;
    let dir = tempfile::tempdir().unwrap();
    let s = run_convergence_experiment(&c, dir.path()).unwrap();
    let slope = s.slope.unwrap();
    let elapsed = start.elapsed();
    verdict(
        4,
        s.failures.is_empty() && slope <= -1.0 && elapsed < Duration::from_secs(600),
        &format!("seed-mean slope {slope:.3} over [{}, {}], {elapsed:.1?}", s.fit_from, s.horizon),
    );
}

#[test]
fn criterion_5_gradients() {
    let mut worst = BTreeMap::new();
    let mut ev = ExperimentConfig::template(ExperimentKind::Gradcheck);
    ev.problem.family = ProblemFamily::Ev;
    ev.problem.agents = 20;
    let mut configs = vec![("ev", ev)];
    for (name, kind) in [
        ("strongly-convex", SyntheticKind::StronglyConvex),
        ("convex", SyntheticKind::Convex),
        ("nonconvex", SyntheticKind::Nonconvex),
    ] {
        let mut c = ExperimentConfig::template(ExperimentKind::Gradcheck);
        c.problem.family = ProblemFamily::Synthetic;
        c.problem.synthetic_kind = kind;
        configs.push((name, c));
    }
    for (name, c) in &configs {
        let instance = c.build_problem().unwrap();
        let s = check_gradients(instance.as_dyn(), 20, c.gradcheck.step, 0, 1e-5).unwrap();
        worst.insert(*name, s.max_rel_error);
    }
    let pass = worst.values().all(|&e| e < 1e-5);
    let detail: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.2e}")).collect();
    verdict(5, pass, &format!("max relative error: {}", detail.join(", ")));
}

#[test]
fn criterion_6_robustness() {
    let c = ExperimentConfig::template(ExperimentKind::Robustness);
    let dir = tempfile::tempdir().unwrap();
    let s = run_robustness_experiment(&c, dir.path()).unwrap();
    let ratios: Vec<String> = s
        .verdicts
        .iter()
        .map(|v| match (&v.divergence, v.ratio) {
            (Some(_), _) => format!("{}:{} diverged", v.algorithm, v.seed),
            (None, Some(r)) => format!("{}:{} {r:.2}", v.algorithm, v.seed),
            (None, None) => format!("{}:{} n/a", v.algorithm, v.seed),
        })
        .collect();
    verdict(
        6,
        s.replicated(),
        &format!(
            "baseline flagged {}/{}, Algorithm 1 flagged {}; ratios {}",
            s.baseline_flagged,
            s.seeds,
            s.algorithm1_flagged,
            ratios.join(", ")
        ),
    );
}

/// Inputs of the 256-bit oracle for a preset.
fn budget_inputs(s: &ScheduleSet, w_hat: f64) -> BudgetInputs {
    let p = s.params();
    BudgetInputs {
        lambda0: p.lambda0,
        u: p.u,
        gamma1: p.gamma1,
        w1: p.w1,
        gamma2: p.gamma2,
        w2: p.w2,
        sigma_xi: p.sigma_xi,
        varsigma_xi: p.varsigma_xi,
        sigma_zeta: p.sigma_zeta,
        varsigma_zeta: p.varsigma_zeta,
        w_hat,
    }
}

/// Match against the oracle, tail ratio and calibration round trip for one
/// preset, or the error that stopped the computation.
fn privacy_checks(preset: &str, w_hat: f64) -> (bool, String) {
    let s = ScheduleSet::preset(preset).unwrap();
    let short = match epsilon(Horizon::Finite(10_000), &s, w_hat, false) {
        Ok(r) => r.epsilon,
        Err(e) => return (false, format!("{preset}: {e}")),
    };
    let oracle = epsilon_256(&budget_inputs(&s, w_hat), 10_000);
    let long = epsilon(Horizon::Finite(1_000_000), &s, w_hat, false).unwrap().epsilon;
    let tail = (long - short) / short;
    let target = 0.5;
    let cal = calibrate_noise(target, Horizon::Finite(10_000), &s, w_hat).unwrap();
    let round = epsilon(Horizon::Finite(10_000), &cal.apply(&s), w_hat, false).unwrap().epsilon;
    let checks = [
        rel(short, oracle) <= 1e-9,
        tail < 0.01,
        rel(round, target) <= 1e-9,
    ];
    (
        checks.iter().all(|&c| c),
        format!(
            "{preset}: eps(1e4) {short:.10e} vs 256-bit {oracle:.10e} (rel {:.1e}); \
             eps(1e6) - eps(1e4) = {:.1}% of eps(1e4); calibrated eps {round:.12} for target {target}",
            rel(short, oracle),
            100.0 * tail
        ),
    )
}

#[test]
fn criterion_7_privacy_accounting() {
    let c = ExperimentConfig::template(ExperimentKind::PrivacyReport);
    let w_hat = c.build_weights(c.topology.seed).unwrap().w_hat();
    let (pass, literal) = privacy_checks("sec5-truthful", w_hat);
    let (_, desk) = privacy_checks("truthful-desk", w_hat);
    verdict(7, pass, &format!("{literal}; for reference {desk}"));
}

#[test]
fn criterion_8_truthfulness() {
    let c = ExperimentConfig::template(ExperimentKind::Truthfulness);
    let dir = tempfile::tempdir().unwrap();
    let s = run_truthfulness_experiment(&c, dir.path()).unwrap();
    let ordering = s.groups.iter().all(|g| g.ordering_holds);
    let bounded = s.rows.iter().all(|r| r.gain_alg1 <= r.eta);
    let groups: Vec<String> = s
        .groups
        .iter()
        .map(|g| {
            format!(
                "group {} median {:.4e} vs noise-free {:.4e}",
                g.group, g.median_gain_alg1, g.median_gain_naive
            )
        })
        .collect();
    verdict(
        8,
        ordering && bounded,
        &format!(
            "ordering {}, every gain <= eta = {:.4e}: {}; {}",
            if ordering { "holds" } else { "fails" },
            s.eta.eta,
            bounded,
            groups.join("; ")
        ),
    );
}

#[test]
fn criterion_9_lemma2() {
    let s = check_lemma2_bounds(200, 10_000, 0);
    let poly = s.violations(Lemma2Part::Polynomial).count();
    let summ = s.violations(Lemma2Part::Summable).count();
    verdict(
        9,
        s.passes(),
        &format!("200 draws to T = 1e4: polynomial bound {poly} violations, summable bound {summ} violations"),
    );
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let key = p.strip_prefix(dir).unwrap().display().to_string();
                out.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_10_determinism() {
    let mut cases = Vec::new();
    let mut conv = ExperimentConfig::template(ExperimentKind::Convergence);
    conv.horizon = 2_000;
    cases.push(conv);
    let mut rob = ExperimentConfig::template(ExperimentKind::Robustness);
    rob.horizon = 200;
    rob.seeds = vec![0, 1, 2];
    cases.push(rob);
    let mut truth = ExperimentConfig::template(ExperimentKind::Truthfulness);
    truth.horizon = 300;
    truth.seeds = vec![0, 1];
    truth.truthfulness.groups = vec![2];
    cases.push(truth);

    let mut mismatches = Vec::new();
    let mut files = 0;
    for base in cases {
        let mut runs = Vec::new();
        for (workers, agent_workers) in [(1, 1), (1, 1), (3, 1), (1, 4)] {
            let mut c = base.clone();
            c.workers = workers;
            c.agent_workers = agent_workers;
            let dir = tempfile::tempdir().unwrap();
            truthful_agg::harness::run_experiment(&c, dir.path()).unwrap();
            runs.push(csv_files(dir.path()));
        }
        files += runs[0].len();
        for (k, r) in runs.iter().enumerate().skip(1) {
            if r != &runs[0] {
                mismatches.push(format!("{} run {k}", base.kind));
            }
        }
    }
    verdict(
        10,
        mismatches.is_empty() && files > 0,
        &format!("{files} CSV files compared over repeat, seed-worker and agent-worker runs; mismatches: {mismatches:?}"),
    );
}
