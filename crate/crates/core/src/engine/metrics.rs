use std::fmt;
use std::io::Write;

use crate::numeric::{dist_sq, NeumaierSum};
use crate::problems::{aggregate, global_cost, global_gradient, AggregativeProblem, OracleSolution, Stacked};

use super::AgentState;

pub const CSV_HEADER: &str = "t,err_x,gap_F,grad_norm_sq,psi_consensus,y_consensus,grad_est_err,weighted_avg_gap,weighted_avg_grad";

/// One logged iteration. Optional fields need an oracle solution.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub t: u64,
    /// `|x_t - x*|^2` over the stacked decision.
    pub err_x: Option<f64>,
    /// `max_i |x_t^i - x*_i|^2`.
    pub err_x_agent_max: Option<f64>,
    pub cost: f64,
    pub gap_f: Option<f64>,
    /// `|x_t - P_X(x_t - grad F(x_t))|^2`, which is `|grad F(x_t)|^2` when
    /// the projection is inactive and zero at constrained stationary points.
    pub grad_norm_sq: f64,
    /// `|psi_t - 1 (x) phi(x_t)|^2`.
    pub psi_consensus: f64,
    /// `|y_t - 1 (x) mean(y_t)|^2`.
    pub y_consensus: f64,
    /// `|estimate - grad F(x_t)|^2`.
    pub grad_est_err: f64,
    /// `sum_s lambda_s gap_s / sum_s lambda_s` over `s <= t`.
    pub weighted_avg_gap: Option<f64>,
    pub weighted_avg_grad: f64,
}

impl MetricsRecord {
    pub fn is_finite(&self) -> bool {
        [
            Some(self.cost),
            self.err_x,
            self.gap_f,
            Some(self.grad_norm_sq),
            Some(self.psi_consensus),
            Some(self.y_consensus),
            Some(self.grad_est_err),
        ]
        .into_iter()
        .flatten()
        .all(f64::is_finite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub t: u64,
    pub agent: usize,
    pub variable: &'static str,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "diverged at t={} (agent {}, {})",
            self.t, self.agent, self.variable
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<MetricsRecord>,
    pub divergence: Option<Divergence>,
    pub final_x: Stacked,
}

impl RunOutput {
    pub fn last(&self) -> Option<&MetricsRecord> {
        self.records.last()
    }

    pub fn at(&self, t: u64) -> Option<&MetricsRecord> {
        self.records.iter().find(|r| r.t == t)
    }
}

pub(super) struct Recorder {
    oracle: Option<(Stacked, f64)>,
    stride: u64,
    force: bool,
    sum_lambda: NeumaierSum,
    sum_gap: NeumaierSum,
    sum_grad: NeumaierSum,
    records: Vec<MetricsRecord>,
}

impl Recorder {
    pub(super) fn new(oracle: Option<&OracleSolution>, stride: u64) -> Self {
        Self {
            oracle: oracle.map(|o| (o.x.clone(), o.value)),
            stride,
            force: false,
            sum_lambda: NeumaierSum::default(),
            sum_gap: NeumaierSum::default(),
            sum_grad: NeumaierSum::default(),
            records: Vec::new(),
        }
    }

    pub(super) fn force_next(&mut self) {
        self.force = true;
    }

    pub(super) fn into_records(self) -> Vec<MetricsRecord> {
        self.records
    }

    pub(super) fn observe<P: AggregativeProblem + ?Sized>(
        &mut self,
        problem: &P,
        t: u64,
        lambda: f64,
        agents: &[AgentState],
        estimate: &[Vec<f64>],
    ) {
        let x: Stacked = agents.iter().map(|a| a.x.clone()).collect();
        let cost = global_cost(problem, &x);
        let grad = global_gradient(problem, &x);
        let grad_norm_sq: f64 = x
            .iter()
            .zip(&grad)
            .enumerate()
            .map(|(i, (xi, gi))| {
                let trial: Vec<f64> = xi.iter().zip(gi).map(|(a, b)| a - b).collect();
                let mut p = vec![0.0; xi.len()];
                problem.project(i, &trial, &mut p);
                dist_sq(xi, &p)
            })
            .sum();
        let gap_f = self.oracle.as_ref().map(|(_, f)| cost - f);
        self.sum_lambda.add(lambda);
        self.sum_grad.add(lambda * grad_norm_sq);
        if let Some(g) = gap_f {
            self.sum_gap.add(lambda * g);
        }
        let due = t.is_multiple_of(self.stride) || self.force;
        self.force = false;
        if !due {
            return;
        }
        let phi = aggregate(problem, &x);
        let m = agents.len() as f64;
        let d = phi.len();
        let y_mean: Vec<f64> = (0..d)
            .map(|k| agents.iter().map(|a| a.y[k]).sum::<f64>() / m)
            .collect();
        let psi_consensus = agents.iter().map(|a| dist_sq(&a.psi, &phi)).sum();
        let y_consensus = agents.iter().map(|a| dist_sq(&a.y, &y_mean)).sum();
        let grad_est_err = estimate.iter().zip(&grad).map(|(e, g)| dist_sq(e, g)).sum();
        let (err_x, err_x_agent_max) = match &self.oracle {
            Some((xs, _)) => {
                let per: Vec<f64> = x.iter().zip(xs).map(|(a, b)| dist_sq(a, b)).collect();
                (
                    Some(per.iter().sum()),
                    Some(per.iter().copied().fold(0.0, f64::max)),
                )
            }
            None => (None, None),
        };
        let total = self.sum_lambda.total();
        self.records.push(MetricsRecord {
            t,
            err_x,
            err_x_agent_max,
            cost,
            gap_f,
            grad_norm_sq,
            psi_consensus,
            y_consensus,
            grad_est_err,
            weighted_avg_gap: gap_f.map(|_| self.sum_gap.total() / total),
            weighted_avg_grad: self.sum_grad.total() / total,
        });
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the metrics table followed by a `# divergence:` summary line.
pub fn write_csv<W: Write>(
    mut out: W,
    records: &[MetricsRecord],
    divergence: Option<&Divergence>,
) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            opt(r.err_x),
            opt(r.gap_f),
            r.grad_norm_sq,
            r.psi_consensus,
            r.y_consensus,
            r.grad_est_err,
            opt(r.weighted_avg_gap),
            r.weighted_avg_grad
        )?;
    }
    match divergence {
        Some(d) => writeln!(out, "# divergence: {d}"),
        None => writeln!(out, "# divergence: none"),
    }
}
