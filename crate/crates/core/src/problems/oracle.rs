//! Full-information projected gradient descent on `F`, used as ground
//! truth for the distributed runs.

use super::{global_cost, global_gradient, AggregativeProblem, Stacked};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Stop when `|x - P(x - grad F(x))| < tol`.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Stacked,
    pub value: f64,
    pub iterations: usize,
    pub pg_norm: f64,
    /// False when `max_iters` ran out; `x` is still the last iterate.
    pub converged: bool,
}

fn project_all<P: AggregativeProblem + ?Sized>(problem: &P, point: &Stacked) -> Stacked {
    point
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut out = vec![0.0; v.len()];
            problem.project(i, v, &mut out);
            out
        })
        .collect()
}

fn step_from(x: &Stacked, grad: &Stacked, s: f64) -> Stacked {
    x.iter()
        .zip(grad)
        .map(|(xi, gi)| xi.iter().zip(gi).map(|(a, b)| a - s * b).collect())
        .collect()
}

fn flat_norm(a: &Stacked, b: &Stacked) -> f64 {
    super::stacked_dist_sq(a, b).sqrt()
}

/// Starts from the projection of the origin. The step doubles every
/// iteration and halves until the local curvature estimate
/// `|grad F(x+) - grad F(x)| <= |x+ - x| / s` holds, which avoids comparing
/// nearly equal function values.
pub fn centralized_oracle<P: AggregativeProblem + ?Sized>(
    problem: &P,
    options: &OracleOptions,
) -> OracleSolution {
    let m = problem.num_agents();
    let zero: Stacked = (0..m).map(|i| vec![0.0; problem.dim_x(i)]).collect();
    let mut x = project_all(problem, &zero);
    let mut grad = global_gradient(problem, &x);
    let mut s: f64 = 1.0;
    let mut pg_norm = f64::INFINITY;
    for iter in 0..options.max_iters {
        pg_norm = flat_norm(&x, &project_all(problem, &step_from(&x, &grad, 1.0)));
        if pg_norm < options.tol {
            return OracleSolution {
                value: global_cost(problem, &x),
                x,
                iterations: iter,
                pg_norm,
                converged: true,
            };
        }
        s *= 2.0;
        loop {
            let next = project_all(problem, &step_from(&x, &grad, s));
            let next_grad = global_gradient(problem, &next);
            let dx = flat_norm(&next, &x);
            let dg = flat_norm(&next_grad, &grad);
            if dg * s <= dx || s < 1e-12 {
                x = next;
                grad = next_grad;
                break;
            }
            s *= 0.5;
        }
    }
    OracleSolution {
        value: global_cost(problem, &x),
        x,
        iterations: options.max_iters,
        pg_norm,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{
        projected_gradient_norm_sq, EvChargingSpec, EvProblem, SyntheticKind, SyntheticProblem,
        SyntheticSpec, SLOTS,
    };

    #[test]
    fn convex_synthetic_stops_below_tol() {
        let p = SyntheticProblem::generate(&SyntheticSpec {
            kind: SyntheticKind::Convex,
            agents: 6,
            ..SyntheticSpec::default()
        });
        let sol = centralized_oracle(
            &p,
            &OracleOptions {
                tol: 1e-8,
                ..OracleOptions::default()
            },
        );
        assert!(sol.converged);
        assert!(projected_gradient_norm_sq(&p, &sol.x).sqrt() < 1e-8);
    }

    #[test]
    fn ev_valley_filling() {
        // Two identical EVs, generous rates: lower-demand slots get more charge.
        let demand: Vec<f64> = [10.5, 10.0, 9.3, 8.6, 8.0, 7.6, 7.3, 7.2, 7.3, 7.7, 8.2, 8.8, 9.4].to_vec();
        let spec = EvChargingSpec::new(
            vec![vec![22.0; SLOTS]; 2],
            vec![80.0; 2],
            vec![demand.clone(); 2],
            24.0,
        );
        let p = EvProblem::new(spec).unwrap();
        let sol = centralized_oracle(&p, &OracleOptions::default());
        assert!(sol.converged);
        for xi in &sol.x {
            assert!((xi.iter().sum::<f64>() - 80.0).abs() < 1e-10);
        }
        let load: Vec<f64> = (0..SLOTS).map(|k| sol.x[0][k] + demand[k]).collect();
        // Charging slots end at a common level; non-charging slots sit above it.
        let level = (0..SLOTS)
            .filter(|&k| sol.x[0][k] > 1e-6)
            .map(|k| load[k])
            .fold(f64::NEG_INFINITY, f64::max);
        for (x, l) in sol.x[0].iter().zip(&load) {
            if *x > 1e-6 {
                assert!((l - level).abs() < 1e-6);
            } else {
                assert!(*l >= level - 1e-6);
            }
        }
        let lowest = (0..SLOTS).min_by(|a, b| demand[*a].total_cmp(&demand[*b])).unwrap();
        let highest = (0..SLOTS).max_by(|a, b| demand[*a].total_cmp(&demand[*b])).unwrap();
        assert!(sol.x[0][lowest] > sol.x[0][highest]);
    }

    #[test]
    fn ev_three_slot_reduction_matches_simplex_grid() {
        let demand = vec![3.0, 1.0, 2.0];
        let spec = EvChargingSpec::new(vec![vec![4.0; 3]], vec![5.0], vec![demand], 6.0);
        let p = EvProblem::new(spec).unwrap();
        let sol = centralized_oracle(&p, &OracleOptions::default());
        let steps = 500;
        let mut best = (f64::INFINITY, vec![]);
        for a in 0..=steps {
            for b in 0..=steps {
                let x0 = 4.0 * a as f64 / steps as f64;
                let x1 = 4.0 * b as f64 / steps as f64;
                let x2 = 5.0 - x0 - x1;
                if !(0.0..=4.0).contains(&x2) {
                    continue;
                }
                let f = global_cost(&p, &[vec![x0, x1, x2]]);
                if f < best.0 {
                    best = (f, vec![x0, x1, x2]);
                }
            }
        }
        assert!(sol.value <= best.0 + 1e-12);
        for k in 0..3 {
            assert!((sol.x[0][k] - best.1[k]).abs() < 2e-2);
        }
    }
}
