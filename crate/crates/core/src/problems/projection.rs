use super::ProblemError;

/// Clamps `point` into `[lo, hi]` componentwise.
pub fn project_box(point: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) {
    for (((o, p), l), h) in out.iter_mut().zip(point).zip(lo).zip(hi) {
        *o = p.clamp(*l, *h);
    }
}

fn clipped_total(point: &[f64], x_max: &[f64], theta: f64) -> f64 {
    point
        .iter()
        .zip(x_max)
        .map(|(p, u)| (p - theta).clamp(0.0, *u))
        .sum()
}

/// Euclidean projection onto `{0 <= x <= x_max, sum x = energy}`.
///
/// The solution is `clip(point - theta, 0, x_max)`. The clipped total is
/// piecewise linear and non-increasing in `theta` with kinks at
/// `point_k - x_max_k` and `point_k`, so `theta` is found exactly on the
/// segment that brackets `energy`.
pub fn project_box_budget(
    point: &[f64],
    x_max: &[f64],
    energy: f64,
    out: &mut [f64],
) -> Result<(), ProblemError> {
    let capacity: f64 = x_max.iter().sum();
    let slack = 1e-12 * capacity.max(1.0);
    if !(energy >= -slack && energy <= capacity + slack) || !energy.is_finite() {
        return Err(ProblemError::InfeasibleBudget { energy, capacity });
    }
    let energy = energy.clamp(0.0, capacity);
    let mut kinks: Vec<f64> = point
        .iter()
        .zip(x_max)
        .flat_map(|(p, u)| [p - u, *p])
        .collect();
    kinks.sort_by(f64::total_cmp);
    kinks.dedup();

    // total(kinks[0]) = capacity, total(kinks[last]) = 0.
    let mut lo = 0;
    let mut hi = kinks.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if clipped_total(point, x_max, kinks[mid]) >= energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t0, t1) = (kinks[lo], kinks[hi]);
    let (h0, h1) = (
        clipped_total(point, x_max, t0),
        clipped_total(point, x_max, t1),
    );
    let theta = if h0 == h1 {
        t0
    } else {
        t0 + (h0 - energy) * (t1 - t0) / (h0 - h1)
    };
    for ((o, p), u) in out.iter_mut().zip(point).zip(x_max) {
        *o = (p - theta).clamp(0.0, *u);
    }

    // Push the residual of the linear solve onto free coordinates.
    let residual = energy - out.iter().sum::<f64>();
    if residual != 0.0 {
        let free: Vec<usize> = (0..out.len())
            .filter(|&k| out[k] > 0.0 && out[k] < x_max[k])
            .collect();
        if !free.is_empty() {
            let share = residual / free.len() as f64;
            for k in free {
                out[k] = (out[k] + share).clamp(0.0, x_max[k]);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn proj(p: &[f64], u: &[f64], e: f64) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        project_box_budget(p, u, e, &mut out).unwrap();
        out
    }

    #[test]
    fn symmetric_split() {
        assert_eq!(proj(&[2.0, 2.0], &[1.0, 1.0], 1.0), vec![0.5, 0.5]);
    }

    #[test]
    fn feasible_point_unchanged() {
        let p = [0.2, 0.5, 0.3];
        let out = proj(&p, &[1.0, 1.0, 1.0], 1.0);
        for (a, b) in out.iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn water_filling_example() {
        let out = proj(&[3.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 2.0);
        assert_eq!(out, vec![1.0, 0.5, 0.5]);
    }

    #[test]
    fn water_filling_matches_grid_search() {
        // Brute force over the feasible set at resolution 1e-3.
        let p = [3.0, 0.0, 0.0];
        let u = [1.0, 1.0, 1.0];
        let e = 2.0;
        let mut best = (f64::INFINITY, [0.0; 3]);
        let steps = 1000;
        for a in 0..=steps {
            for b in 0..=steps {
                let x0 = a as f64 / steps as f64;
                let x1 = b as f64 / steps as f64;
                let x2 = e - x0 - x1;
                if !(0.0..=1.0).contains(&x2) {
                    continue;
                }
                let d = (x0 - p[0]).powi(2) + (x1 - p[1]).powi(2) + (x2 - p[2]).powi(2);
                if d < best.0 {
                    best = (d, [x0, x1, x2]);
                }
            }
        }
        let out = proj(&p, &u, e);
        for (a, b) in out.iter().zip(&best.1) {
            assert!((a - b).abs() <= 1e-3);
        }
    }

    #[test]
    fn extreme_budgets() {
        assert_eq!(proj(&[5.0, -1.0], &[1.0, 2.0], 0.0), vec![0.0, 0.0]);
        assert_eq!(proj(&[5.0, -1.0], &[1.0, 2.0], 3.0), vec![1.0, 2.0]);
        let mut out = [0.0; 2];
        assert!(matches!(
            project_box_budget(&[0.0, 0.0], &[1.0, 1.0], 2.5, &mut out),
            Err(ProblemError::InfeasibleBudget { .. })
        ));
    }

    proptest! {
        #[test]
        fn feasible_idempotent_nonexpansive(
            p in prop::collection::vec(-5.0f64..5.0, 1..14),
            q in prop::collection::vec(-5.0f64..5.0, 14),
            caps in prop::collection::vec(0.1f64..3.0, 14),
            frac in 0.0f64..1.0,
        ) {
            let k = p.len();
            let u = &caps[..k];
            let e = frac * u.iter().sum::<f64>();
            let x = proj(&p, u, e);
            let sum: f64 = x.iter().sum();
            prop_assert!((sum - e).abs() <= 1e-10 * (1.0 + e));
            for (xk, uk) in x.iter().zip(u) {
                prop_assert!(*xk >= 0.0 && *xk <= *uk);
            }
            let again = proj(&x, u, e);
            for (a, b) in again.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            let y = proj(&q[..k], u, e);
            let dp: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
            let dx: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(dx <= dp + 1e-12);
        }

        #[test]
        fn closest_on_coarse_grid(p in prop::collection::vec(-2.0f64..3.0, 3), frac in 0.05f64..0.95) {
            let u = [1.0, 1.5, 0.8];
            let e = frac * 3.3;
            let x = proj(&p, &u, e);
            let dist = |z: &[f64]| z.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let best = dist(&x);
            let steps = 100;
            for a in 0..=steps {
                for b in 0..=steps {
                    let z0 = u[0] * a as f64 / steps as f64;
                    let z1 = u[1] * b as f64 / steps as f64;
                    let z2 = e - z0 - z1;
                    if z2 < 0.0 || z2 > u[2] {
                        continue;
                    }
                    prop_assert!(best <= dist(&[z0, z1, z2]) + 1e-12);
                }
            }
        }
    }
}
