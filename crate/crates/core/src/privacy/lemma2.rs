//! Numeric check of the two bounds for sequences obeying
//! `Phi_{t+1} <= (1 - a_t) Phi_t + b_t` with `a_t = a0 / (t+1)^a` and
//! `b_t = b0 / (t+1)^b`.

use rand::Rng;
use serde::Serialize;

use crate::rng::{Purpose, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecursionParams {
    pub a0: f64,
    pub a: f64,
    pub b0: f64,
    pub b: f64,
    pub phi0: f64,
}

impl RecursionParams {
    pub fn a_t(&self, t: u64) -> f64 {
        self.a0 * ((t + 1) as f64).powf(-self.a)
    }

    pub fn b_t(&self, t: u64) -> f64 {
        self.b0 * ((t + 1) as f64).powf(-self.b)
    }

    /// Hypotheses of the polynomial-rate bound: `a0 > b - a`, `b0 > 0`,
    /// `0 < a < 1`, `b > a`.
    pub fn satisfies_polynomial(&self) -> bool {
        self.a0 > self.b - self.a && self.b0 > 0.0 && self.a > 0.0 && self.a < 1.0 && self.b > self.a
    }

    /// Hypotheses of the summable bound: `a0, b0 > 0`, `a, b > 1`.
    pub fn satisfies_summable(&self) -> bool {
        self.a0 > 0.0 && self.b0 > 0.0 && self.a > 1.0 && self.b > 1.0
    }

    /// `c_Phi b_t / a_t` with `c_Phi = (a0/b0) max(Phi_0, b0 / (a0 - (b - a)))`.
    pub fn polynomial_bound(&self, t: u64) -> f64 {
        let c = self.a0 / self.b0 * self.phi0.max(self.b0 / (self.a0 - (self.b - self.a)));
        c * self.b_t(t) / self.a_t(t)
    }

    /// `Phi_0 exp(-(1 - (t+1)^-(a-1)) / (a-1)) + b0`.
    pub fn summable_bound(&self, t: u64) -> f64 {
        let k = self.a - 1.0;
        self.phi0 * (-(1.0 - ((t + 1) as f64).powf(-k)) / k).exp() + self.b0
    }

    /// Runs the recursion with equality, clamped at zero, for `t <= horizon`
    /// and returns the first iteration exceeding `bound`, if any.
    pub fn first_violation(&self, horizon: u64, bound: impl Fn(u64) -> f64) -> Option<Violation> {
        let mut phi = self.phi0;
        for t in 0..=horizon {
            let limit = bound(t);
            if phi > limit * (1.0 + 1e-12) {
                return Some(Violation { t, value: phi, bound: limit });
            }
            phi = ((1.0 - self.a_t(t)) * phi + self.b_t(t)).max(0.0);
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: u64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Lemma2Part {
    Polynomial,
    Summable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawOutcome {
    pub part: Lemma2Part,
    pub params: RecursionParams,
    pub violation: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma2Summary {
    pub draws: usize,
    pub horizon: u64,
    /// Candidates discarded for failing the hypotheses.
    pub rejected: usize,
    pub outcomes: Vec<DrawOutcome>,
}

impl Lemma2Summary {
    pub fn violations(&self, part: Lemma2Part) -> impl Iterator<Item = &DrawOutcome> {
        self.outcomes
            .iter()
            .filter(move |o| o.part == part && o.violation.is_some())
    }

    pub fn passes(&self) -> bool {
        self.outcomes.iter().all(|o| o.violation.is_none())
    }
}

fn phi0<R: Rng>(rng: &mut R) -> f64 {
    // A quarter of the draws start at zero.
    if rng.random_bool(0.25) {
        0.0
    } else {
        rng.random_range(0.0..10.0)
    }
}

/// `a0` is kept at most one: for `a0 > 1` the factor `1 - a_0` is negative
/// and both bounds fail trivially at `t = 1`.
fn draw_polynomial<R: Rng>(rng: &mut R, rejected: &mut usize) -> RecursionParams {
    loop {
        let a = rng.random_range(0.05..0.95);
        let p = RecursionParams {
            a0: rng.random_range(0.0..=1.0),
            a,
            b0: rng.random_range(1e-6..5.0),
            b: a + rng.random_range(0.01..1.0),
            phi0: phi0(rng),
        };
        if p.satisfies_polynomial() {
            return p;
        }
        *rejected += 1;
    }
}

fn draw_summable<R: Rng>(rng: &mut R, rejected: &mut usize) -> RecursionParams {
    loop {
        let p = RecursionParams {
            a0: rng.random_range(0.0..=1.0),
            a: rng.random_range(1.0..3.0),
            b0: rng.random_range(1e-6..5.0),
            b: rng.random_range(1.0..3.0),
            phi0: phi0(rng),
        };
        if p.satisfies_summable() {
            return p;
        }
        *rejected += 1;
    }
}

/// Draws `draws` parameter sets per part from seeded streams and iterates
/// each to `horizon`.
pub fn check_lemma2(draws: usize, horizon: u64, seed: u64) -> Lemma2Summary {
    let mut rejected = 0;
    let mut outcomes = Vec::with_capacity(2 * draws);
    for k in 0..draws as u64 {
        let mut rng = StreamKey::new(seed, Purpose::Property, k).rng();
        let p = draw_polynomial(&mut rng, &mut rejected);
        outcomes.push(DrawOutcome {
            part: Lemma2Part::Polynomial,
            params: p,
            violation: p.first_violation(horizon, |t| p.polynomial_bound(t)),
        });
        let q = draw_summable(&mut rng, &mut rejected);
        outcomes.push(DrawOutcome {
            part: Lemma2Part::Summable,
            params: q,
            violation: q.first_violation(horizon, |t| q.summable_bound(t)),
        });
    }
    Lemma2Summary {
        draws,
        horizon,
        rejected,
        outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_bound_holds_on_draws() {
        let s = check_lemma2(100, 2000, 11);
        assert_eq!(s.violations(Lemma2Part::Polynomial).count(), 0);
    }

    #[test]
    fn summable_bound_counterexample() {
        let p = RecursionParams {
            a0: 0.1,
            a: 1.5,
            b0: 1.0,
            b: 1.5,
            phi0: 0.0,
        };
        assert!(p.satisfies_summable());
        let v = p.first_violation(10, |t| p.summable_bound(t)).unwrap();
        assert_eq!(v.t, 2);
        assert!((v.value - (1.0 + 0.9 * 2f64.powf(-1.5))).abs() < 1e-15);
    }

    #[test]
    fn zero_start_tiny_forcing_still_runs() {
        let p = RecursionParams {
            a0: 0.5,
            a: 0.5,
            b0: 1e-300,
            b: 0.9,
            phi0: 0.0,
        };
        assert!(p.satisfies_polynomial());
        assert!(p.first_violation(1000, |t| p.polynomial_bound(t)).is_none());
    }

    #[test]
    fn hypothesis_filter_rejects() {
        let p = RecursionParams {
            a0: 0.2,
            a: 0.3,
            b0: 1.0,
            b: 0.8,
            phi0: 1.0,
        };
        assert!(!p.satisfies_polynomial());
        let s = check_lemma2(50, 10, 3);
        assert!(s
            .outcomes
            .iter()
            .filter(|o| o.part == Lemma2Part::Polynomial)
            .all(|o| o.params.satisfies_polynomial()));
        assert!(s.rejected > 0);
    }

    #[test]
    fn seeded_draws_repeat() {
        assert_eq!(check_lemma2(5, 50, 9), check_lemma2(5, 50, 9));
    }
}
