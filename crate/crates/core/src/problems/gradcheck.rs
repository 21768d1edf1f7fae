//! Central-difference verification of the analytic gradients.

use rand::Rng;

use super::{AggregativeProblem, ProblemError, Stacked};

/// Denominator floor for the relative error.
const REL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientKind {
    Grad1F,
    Grad2F,
    JacG,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub kind: GradientKind,
    pub agent: usize,
    /// `(row, col)`; `col` is zero for the vector gradients.
    pub coord: (usize, usize),
    pub per_kind: [f64; 3],
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares every `grad1 f_i`, `grad2 f_i` and `grad g_i` entry at `x` and
/// the shared aggregate point `psi` against central differences with step
/// `h`. Points must sit at least `h` inside the box hull of each `X_i`;
/// equality constraints are ignored since `f_i` and `g_i` are defined on
/// the ambient space.
pub fn finite_diff_check<P: AggregativeProblem + ?Sized>(
    problem: &P,
    x: &[Vec<f64>],
    psi: &[f64],
    h: f64,
) -> Result<GradCheckReport, ProblemError> {
    if !(1e-7..=1e-4).contains(&h) {
        return Err(ProblemError::StepOutOfRange(h));
    }
    for (i, xi) in x.iter().enumerate() {
        let (lo, hi) = problem.x_box(i);
        for j in 0..xi.len() {
            if xi[j] - h <= lo[j] || xi[j] + h >= hi[j] {
                return Err(ProblemError::PointTooCloseToBoundary {
                    agent: i,
                    coord: j,
                    margin: h,
                });
            }
        }
    }
    let d = problem.dim_agg();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        kind: GradientKind::Grad1F,
        agent: 0,
        coord: (0, 0),
        per_kind: [0.0; 3],
    };
    let mut record = |err: f64, kind: GradientKind, agent: usize, coord: (usize, usize)| {
        let slot = kind as usize;
        report.per_kind[slot] = report.per_kind[slot].max(err);
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.kind = kind;
            report.agent = agent;
            report.coord = coord;
        }
    };
    for (i, xi) in x.iter().enumerate() {
        let n = xi.len();
        let mut g1 = vec![0.0; n];
        problem.grad1_f(i, xi, psi, &mut g1);
        let mut g2 = vec![0.0; d];
        problem.grad2_f(i, xi, psi, &mut g2);
        let jac = problem.jac_g(i, xi);

        let mut xp = xi.clone();
        let mut gp = vec![0.0; d];
        let mut gm = vec![0.0; d];
        for j in 0..n {
            xp[j] = xi[j] + h;
            let fp = problem.f(i, &xp, psi);
            problem.g(i, &xp, &mut gp);
            xp[j] = xi[j] - h;
            let fm = problem.f(i, &xp, psi);
            problem.g(i, &xp, &mut gm);
            xp[j] = xi[j];
            record(rel_err(g1[j], (fp - fm) / (2.0 * h)), GradientKind::Grad1F, i, (j, 0));
            for k in 0..d {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                record(rel_err(jac[(j, k)], fd), GradientKind::JacG, i, (j, k));
            }
        }
        let mut pp = psi.to_vec();
        for k in 0..d {
            pp[k] = psi[k] + h;
            let fp = problem.f(i, xi, &pp);
            pp[k] = psi[k] - h;
            let fm = problem.f(i, xi, &pp);
            pp[k] = psi[k];
            record(rel_err(g2[k], (fp - fm) / (2.0 * h)), GradientKind::Grad2F, i, (k, 0));
        }
    }
    Ok(report)
}

/// Uniform point in the middle 90% of each box hull, and an aggregate point
/// in the middle 90% of the aggregate hull.
pub fn sample_interior<P: AggregativeProblem + ?Sized, R: Rng>(
    problem: &P,
    rng: &mut R,
) -> (Stacked, Vec<f64>) {
    let mut inner = |lo: &[f64], hi: &[f64]| -> Vec<f64> {
        lo.iter()
            .zip(hi)
            .map(|(l, u)| {
                let pad = 0.05 * (u - l);
                rng.random_range(l + pad..=u - pad)
            })
            .collect()
    };
    let x = (0..problem.num_agents())
        .map(|i| {
            let (lo, hi) = problem.x_box(i);
            inner(&lo, &hi)
        })
        .collect();
    let (lo, hi) = problem.psi_box();
    let psi = inner(&lo, &hi);
    (x, psi)
}
