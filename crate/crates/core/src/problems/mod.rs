//! Aggregative problems: each agent holds `f_i(x_i, psi)`, `g_i(x_i)` and a
//! compact convex set `X_i`; the global cost is
//! `F(x) = sum_i f_i(x_i, phi(x))` with `phi(x) = mean_i g_i(x_i)`.

mod ev;
mod gradcheck;
mod oracle;
mod projection;
mod synthetic;

pub use ev::{
    parse_demand_csv, EvChargingSpec, EvModel, EvProblem, PriceFunction, DEMAND_PROFILE_GW, SLOTS,
};
pub use gradcheck::{finite_diff_check, sample_interior, GradCheckReport, GradientKind};
pub use oracle::{centralized_oracle, OracleOptions, OracleSolution};
pub use projection::{project_box, project_box_budget};
pub use synthetic::{SyntheticAgent, SyntheticKind, SyntheticProblem, SyntheticSpec};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("agent {agent}: energy {energy} exceeds deliverable {capacity}")]
    InfeasibleSpec {
        agent: usize,
        energy: f64,
        capacity: f64,
    },
    #[error("budget {energy} outside [0, {capacity}]")]
    InfeasibleBudget { energy: f64, capacity: f64 },
    #[error("negative {what} at agent {agent}, slot {slot}")]
    NegativeInput {
        what: &'static str,
        agent: usize,
        slot: usize,
    },
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("point is within {margin} of the box boundary at agent {agent}, coordinate {coord}")]
    PointTooCloseToBoundary {
        agent: usize,
        coord: usize,
        margin: f64,
    },
    #[error("step {0} outside [1e-7, 1e-4]")]
    StepOutOfRange(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("problem has no agents")]
    Empty,
}

/// Regularity constants. `mu` is zero unless `F` is
/// known to be strongly convex.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ProblemConstants {
    pub l_f1: f64,
    pub l_f2: f64,
    pub l_f1_bar: f64,
    pub l_f2_bar: f64,
    pub l_g: f64,
    pub l_g_bar: f64,
    pub mu: f64,
    pub d_x: f64,
    pub d_f: f64,
    pub d_g: f64,
}

/// Per-agent evaluators. Gradients write into caller buffers so the
/// engine's inner loop does not allocate.
///
/// `jac_g_times` applies `grad g_i(x)`, the `n_i x d` transposed Jacobian,
/// to a `d`-vector.
pub trait AggregativeProblem: Sync {
    fn num_agents(&self) -> usize;
    fn dim_x(&self, agent: usize) -> usize;
    fn dim_agg(&self) -> usize;

    fn f(&self, agent: usize, x: &[f64], psi: &[f64]) -> f64;
    fn grad1_f(&self, agent: usize, x: &[f64], psi: &[f64], out: &mut [f64]);
    fn grad2_f(&self, agent: usize, x: &[f64], psi: &[f64], out: &mut [f64]);
    fn g(&self, agent: usize, x: &[f64], out: &mut [f64]);
    fn jac_g_times(&self, agent: usize, x: &[f64], v: &[f64], out: &mut [f64]);
    fn project(&self, agent: usize, point: &[f64], out: &mut [f64]);

    fn constants(&self) -> ProblemConstants;

    /// Componentwise bounds of the box containing `X_i`.
    fn x_box(&self, agent: usize) -> (Vec<f64>, Vec<f64>);
    /// Box covering the range of every `g_i` over `X_i`.
    fn psi_box(&self) -> (Vec<f64>, Vec<f64>);

    fn jac_g(&self, agent: usize, x: &[f64]) -> nalgebra::DMatrix<f64> {
        let n = self.dim_x(agent);
        let d = self.dim_agg();
        let mut jac = nalgebra::DMatrix::zeros(n, d);
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; n];
        for k in 0..d {
            e.fill(0.0);
            e[k] = 1.0;
            self.jac_g_times(agent, x, &e, &mut col);
            for a in 0..n {
                jac[(a, k)] = col[a];
            }
        }
        jac
    }
}

/// Stacked decision: one vector per agent.
pub type Stacked = Vec<Vec<f64>>;

/// `phi(x) = (1/m) sum_i g_i(x_i)`.
pub fn aggregate<P: AggregativeProblem + ?Sized>(problem: &P, x: &[Vec<f64>]) -> Vec<f64> {
    let d = problem.dim_agg();
    let mut acc = vec![0.0; d];
    let mut gi = vec![0.0; d];
    for (i, xi) in x.iter().enumerate() {
        problem.g(i, xi, &mut gi);
        for (a, v) in acc.iter_mut().zip(&gi) {
            *a += v;
        }
    }
    let m = x.len() as f64;
    acc.iter_mut().for_each(|a| *a /= m);
    acc
}

pub fn global_cost<P: AggregativeProblem + ?Sized>(problem: &P, x: &[Vec<f64>]) -> f64 {
    let phi = aggregate(problem, x);
    x.iter()
        .enumerate()
        .map(|(i, xi)| problem.f(i, xi, &phi))
        .sum()
}

/// `grad F(x)_i = grad1 f_i(x_i, phi) + grad g_i(x_i) * mean_j grad2 f_j(x_j, phi)`.
pub fn global_gradient<P: AggregativeProblem + ?Sized>(problem: &P, x: &[Vec<f64>]) -> Stacked {
    let phi = aggregate(problem, x);
    let d = problem.dim_agg();
    let m = x.len();
    let mut mean2 = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for (i, xi) in x.iter().enumerate() {
        problem.grad2_f(i, xi, &phi, &mut buf);
        for (a, v) in mean2.iter_mut().zip(&buf) {
            *a += v / m as f64;
        }
    }
    x.iter()
        .enumerate()
        .map(|(i, xi)| {
            let n = xi.len();
            let mut g1 = vec![0.0; n];
            let mut corr = vec![0.0; n];
            problem.grad1_f(i, xi, &phi, &mut g1);
            problem.jac_g_times(i, xi, &mean2, &mut corr);
            g1.iter().zip(&corr).map(|(a, b)| a + b).collect()
        })
        .collect()
}

/// `||x - P_X(x - grad F(x))||^2`, zero exactly at stationary points.
pub fn projected_gradient_norm_sq<P: AggregativeProblem + ?Sized>(problem: &P, x: &[Vec<f64>]) -> f64 {
    let grad = global_gradient(problem, x);
    let mut total = 0.0;
    for (i, (xi, gi)) in x.iter().zip(&grad).enumerate() {
        let trial: Vec<f64> = xi.iter().zip(gi).map(|(a, b)| a - b).collect();
        let mut p = vec![0.0; xi.len()];
        problem.project(i, &trial, &mut p);
        total += crate::numeric::dist_sq(xi, &p);
    }
    total
}

pub fn stacked_dist_sq(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| crate::numeric::dist_sq(x, y)).sum()
}
