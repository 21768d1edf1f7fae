//! Seeded quadratic-type instances, one per convexity regime.
//!
//! All kinds share `g_i(x) = A_i x + c_i` and the box `[-h, h]^n`:
//! - strongly convex: `f_i = |x - a_i|^2 / 2 + |psi - b_i|^2 / 2`
//! - convex: `f_i = <q_i, x> + |psi - b_i|^2 / 2`
//! - nonconvex: the convex form plus `kappa * sum_j sin(x_j)`

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AggregativeProblem, ProblemConstants};
use crate::rng::{Purpose, StreamKey};

const MARGIN: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    StronglyConvex,
    Convex,
    Nonconvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub agents: usize,
    pub dim_x: usize,
    pub dim_agg: usize,
    pub seed: u64,
    pub half_width: f64,
    pub kappa: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::StronglyConvex,
            agents: 10,
            dim_x: 2,
            dim_agg: 2,
            seed: 0,
            half_width: 2.0,
            kappa: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAgent {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `d x n`.
    pub mat: DMatrix<f64>,
    pub c: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    kind: SyntheticKind,
    agents: Vec<SyntheticAgent>,
    half_width: f64,
    kappa: f64,
    psi_lo: Vec<f64>,
    psi_hi: Vec<f64>,
    constants: ProblemConstants,
}

impl SyntheticProblem {
    pub fn generate(spec: &SyntheticSpec) -> Self {
        let agents = (0..spec.agents)
            .map(|i| {
                let mut rng = StreamKey {
                    agent: i as u64,
                    ..StreamKey::new(spec.seed, Purpose::Instance, 0)
                }
                .rng();
                let mut draw = |len: usize, r: f64| -> Vec<f64> {
                    (0..len).map(|_| rng.random_range(-r..r)).collect()
                };
                let a = draw(spec.dim_x, 1.5);
                let b = draw(spec.dim_agg, 1.0);
                let entries = draw(spec.dim_agg * spec.dim_x, 1.0);
                let c = draw(spec.dim_agg, 0.5);
                let q = draw(spec.dim_x, 1.0);
                SyntheticAgent {
                    a,
                    b,
                    mat: DMatrix::from_row_slice(spec.dim_agg, spec.dim_x, &entries),
                    c,
                    q,
                }
            })
            .collect();
        Self::from_agents(spec.kind, agents, spec.half_width, spec.kappa)
    }

    pub fn from_agents(
        kind: SyntheticKind,
        agents: Vec<SyntheticAgent>,
        half_width: f64,
        kappa: f64,
    ) -> Self {
        let d = agents[0].b.len();
        let mut psi_lo = vec![f64::INFINITY; d];
        let mut psi_hi = vec![f64::NEG_INFINITY; d];
        for ag in &agents {
            for k in 0..d {
                let reach = half_width * ag.mat.row(k).iter().map(|v| v.abs()).sum::<f64>();
                psi_lo[k] = psi_lo[k].min(ag.c[k] - reach);
                psi_hi[k] = psi_hi[k].max(ag.c[k] + reach);
            }
        }
        let mut p = Self {
            kind,
            agents,
            half_width,
            kappa,
            psi_lo,
            psi_hi,
            constants: ProblemConstants {
                l_f1: 0.0,
                l_f2: 0.0,
                l_f1_bar: 0.0,
                l_f2_bar: 0.0,
                l_g: 0.0,
                l_g_bar: 0.0,
                mu: 0.0,
                d_x: 0.0,
                d_f: 0.0,
                d_g: 0.0,
            },
        };
        p.constants = p.compute_constants();
        p
    }

    fn compute_constants(&self) -> ProblemConstants {
        let h = self.half_width;
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut l_f1: f64 = 0.0;
        let mut l_f2: f64 = 0.0;
        let mut l_g: f64 = 0.0;
        let mut d_f: f64 = 0.0;
        let mut d_g: f64 = 0.0;
        for ag in &self.agents {
            let psi_far: Vec<f64> = (0..ag.b.len())
                .map(|k| (self.psi_lo[k] - ag.b[k]).abs().max((self.psi_hi[k] - ag.b[k]).abs()))
                .collect();
            let psi_term = norm(&psi_far);
            l_f2 = l_f2.max(psi_term);
            let (x_grad, x_val) = match self.kind {
                SyntheticKind::StronglyConvex => {
                    let far: Vec<f64> = ag.a.iter().map(|v| h + v.abs()).collect();
                    (norm(&far), 0.5 * norm(&far).powi(2))
                }
                SyntheticKind::Convex => {
                    (norm(&ag.q), h * ag.q.iter().map(|v| v.abs()).sum::<f64>())
                }
                SyntheticKind::Nonconvex => {
                    let g: Vec<f64> = ag.q.iter().map(|v| v.abs() + self.kappa).collect();
                    (
                        norm(&g),
                        h * ag.q.iter().map(|v| v.abs()).sum::<f64>()
                            + self.kappa * ag.q.len() as f64,
                    )
                }
            };
            l_f1 = l_f1.max(x_grad);
            d_f = d_f.max(x_val + 0.5 * psi_term * psi_term);
            let sv = ag.mat.clone().svd(false, false).singular_values;
            l_g = l_g.max(sv.iter().copied().fold(0.0, f64::max));
            let g_far: Vec<f64> = (0..ag.c.len())
                .map(|k| ag.c[k].abs() + h * ag.mat.row(k).iter().map(|v| v.abs()).sum::<f64>())
                .collect();
            d_g = d_g.max(norm(&g_far));
        }
        let (l_f1_bar, mu) = match self.kind {
            SyntheticKind::StronglyConvex => (1.0, 1.0),
            SyntheticKind::Convex => (0.0, 0.0),
            SyntheticKind::Nonconvex => (self.kappa, 0.0),
        };
        let total_dims: usize = self.agents.iter().map(|a| a.a.len()).sum();
        ProblemConstants {
            l_f1: MARGIN * l_f1,
            l_f2: MARGIN * l_f2,
            l_f1_bar: MARGIN * l_f1_bar,
            l_f2_bar: MARGIN,
            l_g: MARGIN * l_g,
            l_g_bar: 0.0,
            mu,
            d_x: 2.0 * h * (total_dims as f64).sqrt(),
            d_f,
            d_g,
        }
    }

    pub fn kind(&self) -> SyntheticKind {
        self.kind
    }

    pub fn agent(&self, i: usize) -> &SyntheticAgent {
        &self.agents[i]
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
}

impl AggregativeProblem for SyntheticProblem {
    fn num_agents(&self) -> usize {
        self.agents.len()
    }

    fn dim_x(&self, i: usize) -> usize {
        self.agents[i].a.len()
    }

    fn dim_agg(&self) -> usize {
        self.agents[0].b.len()
    }

    fn f(&self, i: usize, x: &[f64], psi: &[f64]) -> f64 {
        let ag = &self.agents[i];
        let psi_part: f64 = psi.iter().zip(&ag.b).map(|(p, b)| 0.5 * (p - b) * (p - b)).sum();
        let x_part: f64 = match self.kind {
            SyntheticKind::StronglyConvex => {
                x.iter().zip(&ag.a).map(|(v, a)| 0.5 * (v - a) * (v - a)).sum()
            }
            SyntheticKind::Convex => x.iter().zip(&ag.q).map(|(v, q)| v * q).sum(),
            SyntheticKind::Nonconvex => x
                .iter()
                .zip(&ag.q)
                .map(|(v, q)| v * q + self.kappa * v.sin())
                .sum(),
        };
        x_part + psi_part
    }

    fn grad1_f(&self, i: usize, x: &[f64], _psi: &[f64], out: &mut [f64]) {
        let ag = &self.agents[i];
        for j in 0..out.len() {
            out[j] = match self.kind {
                SyntheticKind::StronglyConvex => x[j] - ag.a[j],
                SyntheticKind::Convex => ag.q[j],
                SyntheticKind::Nonconvex => ag.q[j] + self.kappa * x[j].cos(),
            };
        }
    }

    fn grad2_f(&self, i: usize, _x: &[f64], psi: &[f64], out: &mut [f64]) {
        for ((o, p), b) in out.iter_mut().zip(psi).zip(&self.agents[i].b) {
            *o = p - b;
        }
    }

    fn g(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let ag = &self.agents[i];
        for (k, o) in out.iter_mut().enumerate() {
            *o = ag.c[k] + x.iter().enumerate().map(|(j, v)| ag.mat[(k, j)] * v).sum::<f64>();
        }
    }

    fn jac_g_times(&self, i: usize, _x: &[f64], v: &[f64], out: &mut [f64]) {
        let mat = &self.agents[i].mat;
        for j in 0..out.len() {
            out[j] = (0..v.len()).map(|k| mat[(k, j)] * v[k]).sum();
        }
    }

    fn project(&self, _i: usize, point: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(point) {
            *o = p.clamp(-self.half_width, self.half_width);
        }
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }

    fn x_box(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim_x(i);
        (vec![-self.half_width; n], vec![self.half_width; n])
    }

    fn psi_box(&self) -> (Vec<f64>, Vec<f64>) {
        (self.psi_lo.clone(), self.psi_hi.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{centralized_oracle, global_cost, global_gradient, OracleOptions, Stacked};
    use proptest::prelude::*;

    fn spec(kind: SyntheticKind, m: usize, n: usize, d: usize, seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            kind,
            agents: m,
            dim_x: n,
            dim_agg: d,
            seed,
            ..SyntheticSpec::default()
        }
    }

    /// Hessian of `F` for the stacked decision.
    fn hessian(p: &SyntheticProblem, x: &Stacked) -> DMatrix<f64> {
        let m = p.num_agents();
        let n = p.dim_x(0);
        let d = p.dim_agg();
        let mut big = DMatrix::zeros(d, m * n);
        for i in 0..m {
            big.view_mut((0, i * n), (d, n)).copy_from(&p.agent(i).mat);
        }
        let mut h = big.transpose() * &big / m as f64;
        for i in 0..m {
            for j in 0..n {
                h[(i * n + j, i * n + j)] += match p.kind() {
                    SyntheticKind::StronglyConvex => 1.0,
                    SyntheticKind::Convex => 0.0,
                    SyntheticKind::Nonconvex => -p.kappa() * x[i][j].sin(),
                };
            }
        }
        h
    }

    #[test]
    fn trivial_instance_minimizer_at_origin() {
        let ag = SyntheticAgent {
            a: vec![0.0; 3],
            b: vec![0.0; 3],
            mat: DMatrix::identity(3, 3),
            c: vec![0.0; 3],
            q: vec![0.0; 3],
        };
        let p = SyntheticProblem::from_agents(SyntheticKind::StronglyConvex, vec![ag], 1.0, 0.1);
        let sol = centralized_oracle(&p, &OracleOptions::default());
        assert!(sol.converged);
        assert!(sol.x.iter().flatten().all(|v| v.abs() < 1e-10));
        assert!(sol.value.abs() < 1e-18);
    }

    #[test]
    fn convex_kind_reports_zero_mu() {
        let p = SyntheticProblem::generate(&spec(SyntheticKind::Convex, 4, 2, 2, 1));
        assert_eq!(p.constants().mu, 0.0);
        let p = SyntheticProblem::generate(&spec(SyntheticKind::StronglyConvex, 4, 2, 2, 1));
        assert_eq!(p.constants().mu, 1.0);
    }

    #[test]
    fn oracle_matches_coordinate_grid() {
        let p = SyntheticProblem::generate(&spec(SyntheticKind::StronglyConvex, 5, 1, 1, 3));
        let sol = centralized_oracle(&p, &OracleOptions::default());
        assert!(sol.converged);
        let h = p.half_width();
        for i in 0..5 {
            let mut best = (f64::INFINITY, 0.0);
            let steps = 4000;
            for s in 0..=steps {
                let v = -h + 2.0 * h * s as f64 / steps as f64;
                let mut x = sol.x.clone();
                x[i][0] = v;
                let f = global_cost(&p, &x);
                if f < best.0 {
                    best = (f, v);
                }
            }
            assert!((best.1 - sol.x[i][0]).abs() <= 1e-3, "agent {i}");
        }
    }

    #[test]
    fn oracle_matches_full_grid_two_agents() {
        let p = SyntheticProblem::generate(&spec(SyntheticKind::StronglyConvex, 2, 1, 1, 3));
        let sol = centralized_oracle(&p, &OracleOptions::default());
        let h = p.half_width();
        let eval = |a: f64, b: f64| global_cost(&p, &[vec![a], vec![b]]);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let coarse = 400;
        for s in 0..=coarse {
            for t in 0..=coarse {
                let a = -h + 2.0 * h * s as f64 / coarse as f64;
                let b = -h + 2.0 * h * t as f64 / coarse as f64;
                let f = eval(a, b);
                if f < best.0 {
                    best = (f, a, b);
                }
            }
        }
        let fine = 1e-3;
        let (ca, cb) = (best.1, best.2);
        for s in -20..=20 {
            for t in -20..=20 {
                let a = (ca + s as f64 * fine).clamp(-h, h);
                let b = (cb + t as f64 * fine).clamp(-h, h);
                let f = eval(a, b);
                if f < best.0 {
                    best = (f, a, b);
                }
            }
        }
        assert!((best.1 - sol.x[0][0]).abs() <= 1e-3);
        assert!((best.2 - sol.x[1][0]).abs() <= 1e-3);
    }

    #[test]
    fn nonconvex_has_negative_curvature() {
        let p = SyntheticProblem::generate(&spec(SyntheticKind::Nonconvex, 10, 2, 2, 4));
        let x: Stacked = vec![vec![std::f64::consts::FRAC_PI_2; 2]; 10];
        let ev = hessian(&p, &x).symmetric_eigen().eigenvalues;
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min < -0.09, "min eigenvalue {min}");
    }

    #[test]
    fn grad2_bounded_on_hull() {
        let p = SyntheticProblem::generate(&spec(SyntheticKind::Convex, 6, 3, 2, 8));
        let (lo, hi) = p.psi_box();
        let mut out = vec![0.0; 2];
        for i in 0..6 {
            for corner in 0..4 {
                let psi = [
                    if corner & 1 == 0 { lo[0] } else { hi[0] },
                    if corner & 2 == 0 { lo[1] } else { hi[1] },
                ];
                p.grad2_f(i, &[0.0; 3], &psi, &mut out);
                let n = out.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(n <= p.constants().l_f2);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn strong_convexity_inequality(seed in 0u64..50, xs in prop::collection::vec(-2.0f64..2.0, 24)) {
            let p = SyntheticProblem::generate(&spec(SyntheticKind::StronglyConvex, 6, 2, 2, seed));
            let x: Stacked = xs[..12].chunks(2).map(|c| c.to_vec()).collect();
            let y: Stacked = xs[12..].chunks(2).map(|c| c.to_vec()).collect();
            let gx = global_gradient(&p, &x);
            let inner: f64 = gx.iter().flatten().zip(y.iter().flatten().zip(x.iter().flatten()))
                .map(|(g, (a, b))| g * (a - b)).sum();
            let dist: f64 = y.iter().flatten().zip(x.iter().flatten()).map(|(a, b)| (a - b).powi(2)).sum();
            let lhs = global_cost(&p, &y);
            let rhs = global_cost(&p, &x) + inner + 0.5 * p.constants().mu * dist;
            prop_assert!(lhs >= rhs - 1e-9);
        }
    }
}
