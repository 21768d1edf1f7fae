//! Synchronous-round execution of the noise-injected tracker algorithm and
//! of conventional gradient tracking.
//!
//! Each round of the tracker algorithm runs three barriers: every agent's
//! `y` update (reading neighbours' obscured `y`), then every `x` update,
//! then every `psi` update. Noise is drawn once per sender and round, so
//! all receivers of agent `j` see the same perturbation.

mod metrics;

pub use metrics::{write_csv, Divergence, MetricsRecord, RunOutput, CSV_HEADER};

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::network::WeightMatrix;
use crate::problems::{AggregativeProblem, OracleSolution, Stacked};
use crate::rng::{NoiseTag, Purpose, StreamKey};
use crate::schedules::{noise_vector, BallRadius, ScheduleSet};

use metrics::Recorder;

/// States with any entry above this magnitude count as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;
const GAMMA_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite or exploding {variable} at agent {agent}, iteration {t}")]
    NonFiniteState {
        t: u64,
        agent: usize,
        variable: &'static str,
    },
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub psi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    ProjectZero,
    RandomFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Noise-injected tracking with decaying attenuation and the
    /// projected neighbour trackers.
    Tracker,
    /// Conventional gradient tracking with a constant stepsize.
    Baseline { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub algorithm: Algorithm,
    pub init: InitPolicy,
    /// Worker threads for per-agent updates; 1 runs inline.
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Tracker,
            init: InitPolicy::ProjectZero,
            workers: 1,
        }
    }
}

/// Diagnostics of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub t: u64,
    pub gamma1: f64,
    /// Radius of the projection ball used in this round.
    pub radius: f64,
    /// `mean_i grad2 f_i(x_t^i, psi_t^i)`.
    pub grad2_mean: Vec<f64>,
    /// `mean_i y_{t+1}^i - mean_i y_t^i`.
    pub y_mean_delta: Vec<f64>,
}

struct TrackerOut {
    y_next: Vec<f64>,
    grad2: Vec<f64>,
    direction: Vec<f64>,
}

pub struct RunState<'a, P: AggregativeProblem + ?Sized> {
    problem: &'a P,
    w: &'a WeightMatrix,
    schedules: ScheduleSet,
    options: RunOptions,
    seed: u64,
    t: u64,
    agents: Vec<AgentState>,
    radius: BallRadius,
    pool: Option<Arc<rayon::ThreadPool>>,
    recorder: Option<Recorder>,
}

fn project_ball(v: &mut [f64], radius: f64) {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > radius {
        let s = radius / n;
        v.iter_mut().for_each(|a| *a *= s);
    }
}

fn bad(v: &[f64]) -> bool {
    v.iter().any(|a| !a.is_finite() || a.abs() > DIVERGENCE_LIMIT)
}

/// Builds the initial state: `x_0` from the policy, `psi_0 = g(x_0)` and
/// `y_0 = grad2 f(x_0, psi_0)`.
pub fn init_run<'a, P: AggregativeProblem + ?Sized>(
    problem: &'a P,
    w: &'a WeightMatrix,
    schedules: ScheduleSet,
    seed: u64,
    options: RunOptions,
) -> Result<RunState<'a, P>, EngineError> {
    let m = problem.num_agents();
    if w.len() != m {
        return Err(EngineError::DimensionMismatch {
            what: "weight matrix size",
            expected: m,
            got: w.len(),
        });
    }
    schedules
        .noise
        .check_agents(m)
        .map_err(|_| EngineError::DimensionMismatch {
            what: "per-agent noise profiles",
            expected: m,
            got: 0,
        })?;
    let d = problem.dim_agg();
    let agents = (0..m)
        .map(|i| {
            let n = problem.dim_x(i);
            let start = match options.init {
                InitPolicy::ProjectZero => vec![0.0; n],
                InitPolicy::RandomFeasible => {
                    use rand::Rng;
                    let mut rng = StreamKey {
                        agent: i as u64,
                        ..StreamKey::new(seed, Purpose::Initialization, 0)
                    }
                    .rng();
                    let (lo, hi) = problem.x_box(i);
                    lo.iter()
                        .zip(&hi)
                        .map(|(l, h)| rng.random_range(*l..=*h))
                        .collect()
                }
            };
            let mut x = vec![0.0; n];
            problem.project(i, &start, &mut x);
            let mut psi = vec![0.0; d];
            problem.g(i, &x, &mut psi);
            let mut y = vec![0.0; d];
            problem.grad2_f(i, &x, &psi, &mut y);
            AgentState { x, y, psi }
        })
        .collect();
    let pool = if options.workers > 1 {
        Some(Arc::new(
            rayon::ThreadPoolBuilder::new()
                .num_threads(options.workers)
                .build()
                .map_err(|e| EngineError::Pool(e.to_string()))?,
        ))
    } else {
        None
    };
    let radius = BallRadius::new(schedules.gamma1, problem.constants().l_f2);
    Ok(RunState {
        problem,
        w,
        schedules,
        options,
        seed,
        t: 0,
        agents,
        radius,
        pool,
        recorder: None,
    })
}

impl<'a, P: AggregativeProblem + ?Sized> RunState<'a, P> {
    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn problem(&self) -> &'a P {
        self.problem
    }

    pub fn schedules(&self) -> &ScheduleSet {
        &self.schedules
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Radius of the current projection ball.
    pub fn radius(&self) -> f64 {
        self.radius.radius()
    }

    pub fn decisions(&self) -> Stacked {
        self.agents.iter().map(|a| a.x.clone()).collect()
    }

    fn map_agents<T: Send, F: Fn(usize) -> T + Sync + Send>(&self, f: F) -> Vec<T> {
        let m = self.agents.len();
        match &self.pool {
            Some(pool) => pool.install(|| (0..m).into_par_iter().map(&f).collect()),
            None => (0..m).map(f).collect(),
        }
    }

    fn noisy(&self, tag: NoiseTag, get: fn(&AgentState) -> &Vec<f64>, ball: Option<f64>) -> Vec<Vec<f64>> {
        let t = self.t;
        let seed = self.seed;
        let noise = &self.schedules.noise;
        self.map_agents(|j| {
            let own = get(&self.agents[j]);
            let mut v = vec![0.0; own.len()];
            noise_vector(noise, seed, j, t, tag, &mut v);
            for (a, b) in v.iter_mut().zip(own) {
                *a += b;
            }
            if let Some(r) = ball {
                project_ball(&mut v, r);
            }
            v
        })
    }

    /// Line-4 tracker update for every agent plus the search direction it
    /// implies; nothing is committed.
    fn tracker_update(&self) -> Vec<TrackerOut> {
        let t = self.t;
        let gamma1 = self.schedules.gamma1.value(t);
        let inv_gamma = 1.0 / gamma1.max(GAMMA_FLOOR);
        let perceived = self.noisy(NoiseTag::Zeta, |a| &a.y, Some(self.radius.radius()));
        let problem = self.problem;
        let w = self.w;
        self.map_agents(|i| {
            let ag = &self.agents[i];
            let d = ag.y.len();
            let n = ag.x.len();
            let mut grad2 = vec![0.0; d];
            problem.grad2_f(i, &ag.x, &ag.psi, &mut grad2);
            let self_w = 1.0 + w.diag(i);
            let mut y_next: Vec<f64> = (0..d).map(|k| self_w * ag.y[k] + gamma1 * grad2[k]).collect();
            for &(j, wij) in w.neighbors(i) {
                for k in 0..d {
                    y_next[k] += wij * perceived[j][k];
                }
            }
            let incr: Vec<f64> = (0..d).map(|k| (y_next[k] - ag.y[k]) * inv_gamma).collect();
            let mut direction = vec![0.0; n];
            problem.grad1_f(i, &ag.x, &ag.psi, &mut direction);
            let mut corr = vec![0.0; n];
            problem.jac_g_times(i, &ag.x, &incr, &mut corr);
            for (a, b) in direction.iter_mut().zip(&corr) {
                *a += b;
            }
            TrackerOut {
                y_next,
                grad2,
                direction,
            }
        })
    }

    /// Search directions the baseline would use this round.
    fn baseline_directions(&self) -> Vec<Vec<f64>> {
        let problem = self.problem;
        self.map_agents(|i| {
            let ag = &self.agents[i];
            let n = ag.x.len();
            let mut dir = vec![0.0; n];
            problem.grad1_f(i, &ag.x, &ag.psi, &mut dir);
            let mut corr = vec![0.0; n];
            problem.jac_g_times(i, &ag.x, &ag.y, &mut corr);
            for (a, b) in dir.iter_mut().zip(&corr) {
                *a += b;
            }
            dir
        })
    }

    /// Gradient estimate of the current round, stacked over agents.
    pub fn gradient_estimate(&self) -> Stacked {
        match self.options.algorithm {
            Algorithm::Tracker => self.tracker_update().into_iter().map(|o| o.direction).collect(),
            Algorithm::Baseline { .. } => self.baseline_directions(),
        }
    }

    fn check_finite(&self, t: u64) -> Result<(), EngineError> {
        for (agent, a) in self.agents.iter().enumerate() {
            for (variable, v) in [("x", &a.x), ("y", &a.y), ("psi", &a.psi)] {
                if bad(v) {
                    return Err(EngineError::NonFiniteState { t, agent, variable });
                }
            }
        }
        Ok(())
    }

    fn observe(&mut self, estimate: &[Vec<f64>]) {
        if let Some(mut rec) = self.recorder.take() {
            let lambda = match self.options.algorithm {
                Algorithm::Tracker => self.schedules.lambda.value(self.t),
                Algorithm::Baseline { lambda } => lambda,
            };
            rec.observe(self.problem, self.t, lambda, &self.agents, estimate);
            self.recorder = Some(rec);
        }
    }

    /// One synchronous round.
    pub fn step(&mut self) -> Result<StepTrace, EngineError> {
        match self.options.algorithm {
            Algorithm::Tracker => self.step_tracker(),
            Algorithm::Baseline { lambda } => self.step_baseline(lambda),
        }
    }

    fn step_tracker(&mut self) -> Result<StepTrace, EngineError> {
        let t = self.t;
        let lambda = self.schedules.lambda.value(t);
        let alpha = self.schedules.alpha.value(t);
        let gamma1 = self.schedules.gamma1.value(t);
        let gamma2 = self.schedules.gamma2.value(t);
        let radius = self.radius.radius();

        let outs = self.tracker_update();
        if self.recorder.is_some() {
            let est: Stacked = outs.iter().map(|o| o.direction.clone()).collect();
            self.observe(&est);
        }
        let trace = self.trace(t, gamma1, radius, &outs);

        let problem = self.problem;
        let x_next: Stacked = self.map_agents(|i| {
            let ag = &self.agents[i];
            let trial: Vec<f64> = ag
                .x
                .iter()
                .zip(&outs[i].direction)
                .map(|(x, g)| x - lambda * g)
                .collect();
            let mut out = vec![0.0; trial.len()];
            problem.project(i, &trial, &mut out);
            out
        });

        let perceived = self.noisy(NoiseTag::Xi, |a| &a.psi, None);
        let w = self.w;
        let psi_next: Stacked = self.map_agents(|i| {
            let ag = &self.agents[i];
            let d = ag.psi.len();
            let mut g_new = vec![0.0; d];
            let mut g_old = vec![0.0; d];
            problem.g(i, &x_next[i], &mut g_new);
            problem.g(i, &ag.x, &mut g_old);
            let self_w = 1.0 - alpha + gamma2 * w.diag(i);
            let mut out: Vec<f64> = (0..d)
                .map(|k| self_w * ag.psi[k] + g_new[k] - (1.0 - alpha) * g_old[k])
                .collect();
            for &(j, wij) in w.neighbors(i) {
                for k in 0..d {
                    out[k] += gamma2 * wij * perceived[j][k];
                }
            }
            out
        });

        for (((ag, o), x), psi) in self.agents.iter_mut().zip(outs).zip(x_next).zip(psi_next) {
            ag.y = o.y_next;
            ag.x = x;
            ag.psi = psi;
        }
        self.radius.advance();
        self.t += 1;
        self.check_finite(self.t)?;
        Ok(trace)
    }

    fn trace(&self, t: u64, gamma1: f64, radius: f64, outs: &[TrackerOut]) -> StepTrace {
        let m = self.agents.len() as f64;
        let d = self.problem.dim_agg();
        let mut grad2_mean = vec![0.0; d];
        let mut y_mean_delta = vec![0.0; d];
        for (ag, o) in self.agents.iter().zip(outs) {
            for k in 0..d {
                grad2_mean[k] += o.grad2[k] / m;
                y_mean_delta[k] += o.y_next[k] / m - ag.y[k] / m;
            }
        }
        StepTrace {
            t,
            gamma1,
            radius,
            grad2_mean,
            y_mean_delta,
        }
    }

    fn step_baseline(&mut self, lambda: f64) -> Result<StepTrace, EngineError> {
        let t = self.t;
        let dirs = self.baseline_directions();
        self.observe(&dirs);
        let problem = self.problem;
        let w = self.w;

        let x_next: Stacked = self.map_agents(|i| {
            let trial: Vec<f64> = self.agents[i]
                .x
                .iter()
                .zip(&dirs[i])
                .map(|(x, g)| x - lambda * g)
                .collect();
            let mut out = vec![0.0; trial.len()];
            problem.project(i, &trial, &mut out);
            out
        });

        let perceived_psi = self.noisy(NoiseTag::Xi, |a| &a.psi, None);
        let psi_next: Stacked = self.map_agents(|i| {
            let ag = &self.agents[i];
            let d = ag.psi.len();
            let mut g_new = vec![0.0; d];
            let mut g_old = vec![0.0; d];
            problem.g(i, &x_next[i], &mut g_new);
            problem.g(i, &ag.x, &mut g_old);
            let self_w = 1.0 + w.diag(i);
            let mut out: Vec<f64> = (0..d)
                .map(|k| self_w * ag.psi[k] + g_new[k] - g_old[k])
                .collect();
            for &(j, wij) in w.neighbors(i) {
                for k in 0..d {
                    out[k] += wij * perceived_psi[j][k];
                }
            }
            out
        });

        let perceived_y = self.noisy(NoiseTag::Zeta, |a| &a.y, None);
        let mut grad2_mean = vec![0.0; problem.dim_agg()];
        let m = self.agents.len() as f64;
        let y_next: Stacked = self.map_agents(|i| {
            let ag = &self.agents[i];
            let d = ag.y.len();
            let mut old = vec![0.0; d];
            let mut new = vec![0.0; d];
            problem.grad2_f(i, &ag.x, &ag.psi, &mut old);
            problem.grad2_f(i, &x_next[i], &psi_next[i], &mut new);
            let self_w = 1.0 + w.diag(i);
            let mut out: Vec<f64> = (0..d).map(|k| self_w * ag.y[k] + new[k] - old[k]).collect();
            for &(j, wij) in w.neighbors(i) {
                for k in 0..d {
                    out[k] += wij * perceived_y[j][k];
                }
            }
            out
        });
        let mut y_mean_delta = vec![0.0; problem.dim_agg()];
        for (i, ag) in self.agents.iter().enumerate() {
            let mut g2 = vec![0.0; ag.y.len()];
            problem.grad2_f(i, &ag.x, &ag.psi, &mut g2);
            for k in 0..g2.len() {
                grad2_mean[k] += g2[k] / m;
                y_mean_delta[k] += (y_next[i][k] - ag.y[k]) / m;
            }
        }
        for (((ag, x), psi), y) in self.agents.iter_mut().zip(x_next).zip(psi_next).zip(y_next) {
            ag.x = x;
            ag.psi = psi;
            ag.y = y;
        }
        self.t += 1;
        self.check_finite(self.t)?;
        Ok(StepTrace {
            t,
            gamma1: 1.0,
            radius: f64::INFINITY,
            grad2_mean,
            y_mean_delta,
        })
    }

    /// Runs `horizon` rounds, recording metrics at every multiple of
    /// `stride` and at `horizon`. Divergence stops the run and is reported
    /// alongside the partial log.
    pub fn run(
        &mut self,
        horizon: u64,
        stride: u64,
        oracle: Option<&OracleSolution>,
    ) -> RunOutput {
        let stride = stride.max(1);
        let start = self.t;
        let end = start + horizon;
        self.recorder = Some(Recorder::new(oracle, stride));
        let mut divergence = None;
        while self.t < end {
            if let Err(EngineError::NonFiniteState { t, agent, variable }) = self.step() {
                divergence = Some(Divergence { t, agent, variable });
                break;
            }
        }
        if divergence.is_none() {
            // Final record: the round at `end` is evaluated but not committed.
            let est = self.gradient_estimate();
            if let Some(rec) = self.recorder.as_mut() {
                rec.force_next();
            }
            self.observe(&est);
        }
        let rec = self.recorder.take().expect("recorder installed above");
        RunOutput {
            records: rec.into_records(),
            divergence,
            final_x: self.decisions(),
        }
    }
}
