//! Adjacent-problem study: what a group of EV owners gains by misreporting
//! its non-EV demand, under the tracker and under a noise-free baseline.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::{init_run, Algorithm, AgentState, RunOptions};
use crate::network::WeightMatrix;
use crate::numeric::median;
use crate::privacy::{epsilon, eta, EtaReport, Horizon};
use crate::problems::{aggregate, global_cost, AggregativeProblem, EvProblem, Stacked};
use crate::schedules::ScheduleSet;

use super::output::{write_file, write_manifest};
use super::svg::{LinePlot, Series};
use super::{run_seeds, ChargingPolicy, ExperimentConfig, HarnessError, Outcome};

/// Moves `fraction` of the demand before `pivot` to the slots from `pivot`
/// on, in proportion to their current demand (uniformly if they have
/// none). Total demand is preserved.
pub fn misreported_demand(demand: &[f64], pivot: usize, fraction: f64) -> Result<Vec<f64>, HarnessError> {
    if pivot == 0 || pivot >= demand.len() {
        return Err(HarnessError::Scenario(format!(
            "pivot slot {pivot} must split the {} slots",
            demand.len()
        )));
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(HarnessError::Scenario(format!("fraction {fraction} outside [0, 1]")));
    }
    let mut d = demand.to_vec();
    let moved: f64 = d[..pivot].iter().map(|v| v * fraction).sum();
    let post: f64 = d[pivot..].iter().sum();
    for v in &mut d[..pivot] {
        *v *= 1.0 - fraction;
    }
    let n_post = (d.len() - pivot) as f64;
    for v in &mut d[pivot..] {
        *v += if post > 0.0 { moved * *v / post } else { moved / n_post };
    }
    Ok(d)
}

/// The misreporting agents and the demand each of them reports. Runs on
/// both problems share the seed, hence the initial state and every noise
/// draw.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacentScenario {
    pub reports: Vec<(usize, Vec<f64>)>,
}

impl AdjacentScenario {
    /// Every member of `agents` shifts demand across `pivot`.
    pub fn shift(problem: &EvProblem, agents: &[usize], pivot: usize, fraction: f64) -> Result<Self, HarnessError> {
        let reports = agents
            .iter()
            .map(|&i| {
                let d = problem
                    .spec()
                    .demand
                    .get(i)
                    .ok_or_else(|| HarnessError::Scenario(format!("agent {i} out of range")))?;
                Ok((i, misreported_demand(d, pivot, fraction)?))
            })
            .collect::<Result<Vec<_>, HarnessError>>()?;
        Ok(Self { reports })
    }

    pub fn agents(&self) -> Vec<usize> {
        self.reports.iter().map(|(i, _)| *i).collect()
    }

    /// The reported problem. Only the listed agents' entries change.
    pub fn apply(&self, problem: &EvProblem) -> Result<EvProblem, HarnessError> {
        let mut q = problem.clone();
        for (i, d) in &self.reports {
            q = q.with_demand(*i, d.clone())?;
        }
        Ok(q)
    }
}

/// Final decisions and aggregate estimates of one run.
struct Outcome1 {
    x: Stacked,
    psi: Vec<Vec<f64>>,
}

fn run_to_end(
    problem: &EvProblem,
    w: &WeightMatrix,
    schedules: &ScheduleSet,
    algorithm: Algorithm,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<Outcome1, HarnessError> {
    let options = RunOptions {
        algorithm,
        workers: config.agent_workers,
        ..RunOptions::default()
    };
    let mut state = init_run(problem, w, schedules.clone(), seed, options)?;
    let out = state.run(config.horizon, config.horizon, None);
    if let Some(d) = out.divergence {
        return Err(HarnessError::Scenario(format!("seed {seed}: {d}")));
    }
    Ok(Outcome1 {
        x: out.final_x,
        psi: state.agents().iter().map(|a: &AgentState| a.psi.clone()).collect(),
    })
}

/// Full rate in `cheap` slots, in the given order, until the energy is
/// met; what is left follows the schedule's shape over the other slots,
/// then fills the remaining room in `order`.
fn fill(truth: &EvProblem, i: usize, scheduled: &[f64], order: &[usize], cheap: &[bool]) -> Vec<f64> {
    let spec = truth.spec();
    let cap = &spec.x_max[i];
    let mut left = spec.energy[i];
    let mut x = vec![0.0; scheduled.len()];
    for &k in order.iter().filter(|k| cheap[**k]) {
        x[k] = cap[k].min(left);
        left -= x[k];
    }
    let rest: Vec<usize> = order.iter().copied().filter(|k| !cheap[*k]).collect();
    let shape: f64 = rest.iter().map(|k| scheduled[*k].max(0.0)).sum();
    if left > 0.0 && shape > 0.0 {
        let want = left;
        for &k in &rest {
            x[k] = (want * scheduled[k].max(0.0) / shape).min(cap[k]);
            left -= x[k];
        }
    }
    for &k in &rest {
        if left <= 0.0 {
            break;
        }
        let v = (cap[k] - x[k]).min(left);
        x[k] += v;
        left -= v;
    }
    x
}

/// Charging plan of agent `i` given what the run told it. `truthful` is
/// the run on the true problem when `run` is the misreported one.
fn plan(policy: ChargingPolicy, truth: &EvProblem, i: usize, run: &Outcome1, truthful: Option<&Outcome1>) -> Vec<f64> {
    let predicted = truth.prices(&run.psi[i]);
    let n = predicted.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| predicted[*a].total_cmp(&predicted[*b]));
    match policy {
        ChargingPolicy::FollowSchedule => run.x[i].clone(),
        ChargingPolicy::PriceThreshold { ratio } => {
            let threshold = ratio * predicted.iter().sum::<f64>() / n as f64;
            let cheap: Vec<bool> = predicted.iter().map(|p| *p <= threshold).collect();
            fill(truth, i, &run.x[i], &order, &cheap)
        }
        ChargingPolicy::BelowTruthful => match truthful {
            None => run.x[i].clone(),
            Some(base) => {
                let reference = truth.prices(&base.psi[i]);
                let cheap: Vec<bool> = predicted.iter().zip(&reference).map(|(p, r)| p < r).collect();
                fill(truth, i, &run.x[i], &order, &cheap)
            }
        },
    }
}

/// Decisions actually charged: the group applies the policy, everyone else
/// follows the schedule.
fn realized(
    policy: ChargingPolicy,
    truth: &EvProblem,
    group: &[usize],
    run: &Outcome1,
    truthful: Option<&Outcome1>,
) -> Stacked {
    let mut x = run.x.clone();
    for &i in group {
        x[i] = plan(policy, truth, i, run, truthful);
    }
    x
}

/// Mean true cost of the group's members.
fn group_cost(truth: &EvProblem, group: &[usize], x: &Stacked) -> f64 {
    let phi = aggregate(truth, x);
    group.iter().map(|&i| truth.f(i, &x[i], &phi)).sum::<f64>() / group.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainRow {
    pub group: usize,
    pub seed: u64,
    pub gain_alg1: f64,
    pub gain_naive: f64,
    pub eta: f64,
    /// `F(x') - F(x)` under the true problem, tracker runs.
    pub global_inflation: f64,
    pub naive_inflation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: usize,
    pub agents: Vec<usize>,
    pub median_gain_alg1: f64,
    pub median_gain_naive: f64,
    pub max_gain_alg1: f64,
    pub ordering_holds: bool,
    pub bounded_by_eta: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthfulnessSummary {
    pub policy: ChargingPolicy,
    /// Single-agent budget of the tracker over the horizon.
    pub epsilon: f64,
    /// Bound for a deviating group of two, from the group budget `2 eps`.
    pub eta: EtaReport,
    pub groups: Vec<GroupSummary>,
    pub rows: Vec<GainRow>,
}

impl TruthfulnessSummary {
    pub fn outcome(&self) -> Outcome {
        let mut msgs = Vec::new();
        for g in &self.groups {
            if !g.bounded_by_eta {
                msgs.push(format!("group {}: gain {} exceeds eta", g.group, g.max_gain_alg1));
            }
            if !g.ordering_holds {
                msgs.push(format!(
                    "group {}: median gain {} under Algorithm 1 not below {} without noise",
                    g.group, g.median_gain_alg1, g.median_gain_naive
                ));
            }
        }
        if msgs.is_empty() {
            Outcome::Success
        } else {
            Outcome::AssertionFailed(msgs)
        }
    }
}

fn gains_csv(rows: &[&GainRow]) -> String {
    let mut s = String::from("seed,gain_alg1,gain_naive,eta,global_inflation\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.seed, r.gain_alg1, r.gain_naive, r.eta, r.global_inflation);
    }
    s
}

/// Four runs per seed and group: the true and the reported problem, each
/// under the tracker with `alg1_preset` and under the noise-free baseline.
/// Costs are the group members' true costs at the realized decisions.
pub fn run_truthfulness_experiment(
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<TruthfulnessSummary, HarnessError> {
    let tc = &config.truthfulness;
    let instance = config.build_problem()?;
    let truth = instance.as_ev().ok_or(HarnessError::NeedsEv("truthfulness"))?;
    let alg1 = ScheduleSet::preset(&tc.alg1_preset)?;
    let naive = config.schedule_set()?.without_noise();
    let naive_alg = Algorithm::Baseline { lambda: tc.naive_lambda };

    let scenarios = tc
        .groups
        .iter()
        .map(|&g| {
            let agents = truth.spec().group_members(g);
            if agents.is_empty() {
                return Err(HarnessError::Scenario(format!("group {g} has no members")));
            }
            let s = AdjacentScenario::shift(truth, &agents, tc.pivot_slot, tc.shift_fraction)?;
            let reported = s.apply(truth)?;
            Ok((g, s, reported))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let w0 = config.build_weights(config.seeds[0])?;
    let budget = epsilon(Horizon::Finite(config.horizon), &alg1, w0.w_hat(), false)?;
    let group_size = scenarios.iter().map(|(_, s, _)| s.reports.len()).max().unwrap_or(1);
    let bound = eta(group_size as f64 * budget.epsilon, &truth.constants());

    let per_seed = run_seeds(&config.seeds, config.workers, |seed| {
        let w = config.build_weights(seed)?;
        let base_alg1 = run_to_end(truth, &w, &alg1, Algorithm::Tracker, seed, config)?;
        let base_naive = run_to_end(truth, &w, &naive, naive_alg, seed, config)?;
        scenarios
            .iter()
            .map(|(g, s, reported)| {
                let group = s.agents();
                let lie_alg1 = run_to_end(reported, &w, &alg1, Algorithm::Tracker, seed, config)?;
                let lie_naive = run_to_end(reported, &w, &naive, naive_alg, seed, config)?;
                let x = |run: &Outcome1, base: Option<&Outcome1>| realized(tc.policy, truth, &group, run, base);
                let (xa, xa2) = (x(&base_alg1, None), x(&lie_alg1, Some(&base_alg1)));
                let (xn, xn2) = (x(&base_naive, None), x(&lie_naive, Some(&base_naive)));
                Ok((
                    GainRow {
                        group: *g,
                        seed,
                        gain_alg1: group_cost(truth, &group, &xa) - group_cost(truth, &group, &xa2),
                        gain_naive: group_cost(truth, &group, &xn) - group_cost(truth, &group, &xn2),
                        eta: bound.eta,
                        global_inflation: global_cost(truth, &xa2) - global_cost(truth, &xa),
                        naive_inflation: global_cost(truth, &xn2) - global_cost(truth, &xn),
                    },
                    (aggregate(truth, &xn), aggregate(truth, &xn2)),
                ))
            })
            .collect::<Result<Vec<_>, HarnessError>>()
    })?;

    let mut rows = Vec::new();
    let mut loads: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    for result in per_seed {
        for (row, (p, q)) in result? {
            if row.seed == config.seeds[0] {
                loads.push((row.group, p, q));
            }
            rows.push(row);
        }
    }

    let mut artifacts = Vec::new();
    let mut groups = Vec::new();
    for (g, s, _) in &scenarios {
        let mine: Vec<&GainRow> = rows.iter().filter(|r| r.group == *g).collect();
        let a: Vec<f64> = mine.iter().map(|r| r.gain_alg1).collect();
        let n: Vec<f64> = mine.iter().map(|r| r.gain_naive).collect();
        let max_a = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        groups.push(GroupSummary {
            group: *g,
            agents: s.agents(),
            median_gain_alg1: median(&a),
            median_gain_naive: median(&n),
            max_gain_alg1: max_a,
            ordering_holds: median(&a) < median(&n),
            bounded_by_eta: max_a <= bound.eta,
        });
        let sub = PathBuf::from(format!("group-{g}"));
        write_file(&dir.join(sub.join("gains.csv")), gains_csv(&mine))?;
        artifacts.push(sub.join("gains.csv"));
        if let Some((_, p, q)) = loads.iter().find(|(h, _, _)| h == g) {
            let prices = |load: &[f64]| -> Vec<(f64, f64)> {
                truth.prices(load).into_iter().enumerate().map(|(k, v)| (k as f64, v)).collect()
            };
            let plot = LinePlot {
                title: format!("group {g}, seed {}: baseline prices at realized load", config.seeds[0]),
                x_label: "slot".into(),
                y_label: "price".into(),
                log_x: false,
                log_y: false,
                series: vec![Series::new("truthful", prices(p)), Series::new("misreported", prices(q))],
            };
            write_file(&dir.join(sub.join("prices.svg")), plot.render())?;
            artifacts.push(sub.join("prices.svg"));
        }
    }

    let summary = TruthfulnessSummary {
        policy: tc.policy,
        epsilon: budget.epsilon,
        eta: bound,
        groups,
        rows,
    };
    let mut table = String::from("group,median_gain_alg1,median_gain_naive,max_gain_alg1,eta,ordering_holds,bounded_by_eta\n");
    for g in &summary.groups {
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{}",
            g.group, g.median_gain_alg1, g.median_gain_naive, g.max_gain_alg1, bound.eta, g.ordering_holds, g.bounded_by_eta
        );
    }
    write_file(&dir.join("summary.csv"), table)?;
    artifacts.push("summary.csv".into());
    write_manifest(
        config,
        dir,
        &artifacts,
        vec![format!(
            "eta uses the group budget {group_size} x epsilon; gains are mean true-cost reductions per group member"
        )],
    )?;
    Ok(summary)
}
