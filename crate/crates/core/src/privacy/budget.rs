//! Sensitivity bounds, the cumulative budget and the truthfulness bound.

use std::f64::consts::{E, SQRT_2};
use std::fmt;

use serde::Serialize;

use super::regime::{check_regime, Regime};
use super::PrivacyError;
use crate::numeric::NeumaierSum;
use crate::problems::ProblemConstants;
use crate::schedules::{AgentProfiles, ScheduleSet};

/// Hard cap on the number of series terms for an unbounded horizon.
pub const MAX_SERIES_TERMS: u64 = 10_000_000;
/// Relative tail size at which summation of an unbounded horizon stops.
pub const TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Horizon {
    Finite(u64),
    Infinite,
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(t) => write!(f, "{t}"),
            Horizon::Infinite => f.write_str("inf"),
        }
    }
}

/// `c1 = w_hat gamma2 / (w_hat gamma2 - (u - w1 - w2))`.
pub fn c1(w_hat: f64, schedules: &ScheduleSet) -> Result<f64, PrivacyError> {
    let a0 = w_hat * schedules.gamma2.base;
    let gap = schedules.lambda.exponent - schedules.gamma1.exponent - schedules.gamma2.exponent;
    let denom = a0 - gap;
    if denom <= 0.0 {
        return Err(PrivacyError::DenominatorNonpositive { contraction: a0, gap });
    }
    Ok(a0 / denom)
}

/// `c2 = (4 w1 / (e ln(2 / (2 - w_hat))))^w1 * 2 / w_hat`.
pub fn c2(w_hat: f64, w1: f64) -> Result<f64, PrivacyError> {
    if !(w_hat > 0.0 && w_hat < 2.0) {
        return Err(PrivacyError::InvalidW(w_hat));
    }
    let log = (2.0 / (2.0 - w_hat)).ln();
    Ok((4.0 * w1 / (E * log)).powf(w1) * 2.0 / w_hat)
}

/// Closed-form bound on the aggregate-tracker sensitivity at iteration `t`.
pub fn sensitivity_psi(t: u64, schedules: &ScheduleSet, w_hat: f64) -> Result<f64, PrivacyError> {
    let c1 = c1(w_hat, schedules)?;
    Ok(c1 * schedules.lambda.value(t) / (schedules.gamma1.value(t) * schedules.gamma2.value(t)))
}

/// Closed-form bound on the gradient-tracker sensitivity at iteration `t`.
pub fn sensitivity_y(t: u64, schedules: &ScheduleSet, w_hat: f64) -> Result<f64, PrivacyError> {
    Ok(c2(w_hat, schedules.gamma1.exponent)? * schedules.gamma1.value(t))
}

/// Per-step bound on `|x_{t+1} - x_t|` in units of `lambda_t / gamma_{t,1}`.
/// Needs `w1 > 1`.
pub fn decision_step_constant(constants: &ProblemConstants, schedules: &ScheduleSet) -> f64 {
    let g1 = schedules.gamma1.base;
    let w1 = schedules.gamma1.exponent;
    g1 * constants.l_f1 + 2.0 * constants.l_g * (1.0 + g1 * w1 / (w1 - 1.0)) * constants.l_f2
}

/// Forcing constant of the sensitivity recursion,
/// `2 c0 sqrt(d) L_g + 2 sqrt(d) D_g`.
pub fn recursion_constant(constants: &ProblemConstants, schedules: &ScheduleSet, d: usize) -> f64 {
    let sd = (d as f64).sqrt();
    2.0 * decision_step_constant(constants, schedules) * sd * constants.l_g + 2.0 * sd * constants.d_g
}

/// Iterates `D_{t+1} = |1 - gamma_{t,2} w_hat| D_t + k lambda_t / gamma_{t,1}`
/// from `D_0 = 0` and returns `D_0..=D_horizon`.
pub fn iterate_sensitivity_psi(schedules: &ScheduleSet, w_hat: f64, k: f64, horizon: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon as usize + 1);
    let mut d = 0.0;
    out.push(d);
    for t in 0..horizon {
        let s = schedules;
        d = (1.0 - s.gamma2.value(t) * w_hat).abs() * d + k * s.lambda.value(t) / s.gamma1.value(t);
        out.push(d);
    }
    out
}

/// The two geometric series that make up the budget: the `t`-th term of
/// each is `coef / (t + 1)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesTerm {
    pub coef: f64,
    pub exponent: f64,
}

impl SeriesTerm {
    #[inline]
    pub fn at(&self, t: u64) -> f64 {
        self.coef * ((t + 1) as f64).powf(-self.exponent)
    }

    /// Upper bound on `sum_{t > n} at(t)` via `int_{n+1}^inf coef x^-p dx`.
    pub fn tail_after(&self, n: u64) -> f64 {
        if self.exponent <= 1.0 {
            return f64::INFINITY;
        }
        self.coef * ((n + 1) as f64).powf(1.0 - self.exponent) / (self.exponent - 1.0)
    }
}

/// Inputs of the budget formula pulled from a schedule set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetTerms {
    pub psi: SeriesTerm,
    pub y: SeriesTerm,
    pub c1: f64,
    pub c2: f64,
    pub w_hat: f64,
    /// Agents holding the smallest noise bases.
    pub limiting_agent_xi: usize,
    pub limiting_agent_zeta: usize,
}

impl BudgetTerms {
    pub fn new(schedules: &ScheduleSet, w_hat: f64) -> Result<Self, PrivacyError> {
        if !schedules.noise.enabled {
            return Err(PrivacyError::NoiseDisabled);
        }
        let conditions = check_regime(schedules, Regime::Truthful);
        if !conditions.passes() {
            return Err(PrivacyError::RegimeViolation(
                conditions.failures().map(|f| f.name.clone()).collect(),
            ));
        }
        let s = schedules;
        let c1 = c1(w_hat, s)?;
        let c2 = c2(w_hat, s.gamma1.exponent)?;
        let (sigma_xi, agent_xi) = s.noise.xi.min_base();
        let (sigma_zeta, agent_zeta) = s.noise.zeta.min_base();
        Ok(Self {
            psi: SeriesTerm {
                coef: SQRT_2 * c1 * s.lambda.base / (sigma_xi * s.gamma1.base * s.gamma2.base),
                exponent: s.lambda.exponent
                    - s.gamma1.exponent
                    - s.gamma2.exponent
                    - s.noise.xi.max_exponent(),
            },
            y: SeriesTerm {
                coef: SQRT_2 * c2 * s.gamma1.base / sigma_zeta,
                exponent: s.gamma1.exponent - s.noise.zeta.max_exponent(),
            },
            c1,
            c2,
            w_hat,
            limiting_agent_xi: agent_xi,
            limiting_agent_zeta: agent_zeta,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport {
    pub horizon: Horizon,
    /// Certified budget: summed terms plus `tail_bound`.
    pub epsilon: f64,
    pub epsilon_psi: f64,
    pub epsilon_y: f64,
    /// Upper bound on the unsummed remainder; zero for a finite horizon.
    pub tail_bound: f64,
    /// Number of summed iterations, starting at `t = 1`.
    pub terms: u64,
    /// False when an unbounded horizon stopped at `MAX_SERIES_TERMS` before
    /// the tail became negligible.
    pub tail_negligible: bool,
    pub constants: BudgetTerms,
    /// `(psi term, y term)` for `t = 1..=terms` when requested.
    pub per_iteration: Vec<(f64, f64)>,
}

/// Sums the budget series from `t = 1`. An infinite horizon sums until the
/// integral tail bound drops below `TAIL_TOLERANCE` of the running sum.
pub fn epsilon(
    horizon: Horizon,
    schedules: &ScheduleSet,
    w_hat: f64,
    keep_terms: bool,
) -> Result<PrivacyReport, PrivacyError> {
    let terms = BudgetTerms::new(schedules, w_hat)?;
    let mut sum_psi = NeumaierSum::default();
    let mut sum_y = NeumaierSum::default();
    let mut per = Vec::new();
    let limit = match horizon {
        Horizon::Finite(t) => t,
        Horizon::Infinite => MAX_SERIES_TERMS,
    };
    let mut n = 0;
    let mut tail = 0.0;
    let mut negligible = true;
    // Checking the tail on every term is wasteful; powers of two suffice.
    let mut next_check = 1u64;
    while n < limit {
        n += 1;
        let (a, b) = (terms.psi.at(n), terms.y.at(n));
        sum_psi.add(a);
        sum_y.add(b);
        if keep_terms {
            per.push((a, b));
        }
        if horizon == Horizon::Infinite && n == next_check {
            next_check *= 2;
            tail = terms.psi.tail_after(n) + terms.y.tail_after(n);
            if tail < TAIL_TOLERANCE * (sum_psi.total() + sum_y.total()) {
                break;
            }
        }
    }
    if horizon == Horizon::Infinite {
        tail = terms.psi.tail_after(n) + terms.y.tail_after(n);
        negligible = tail < TAIL_TOLERANCE * (sum_psi.total() + sum_y.total());
    }
    let (ep, ey) = (sum_psi.total(), sum_y.total());
    Ok(PrivacyReport {
        horizon,
        epsilon: ep + ey + tail,
        epsilon_psi: ep,
        epsilon_y: ey,
        tail_bound: tail,
        terms: n,
        tail_negligible: negligible,
        constants: terms,
        per_iteration: per,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaReport {
    pub eta: f64,
    /// `(L_f1 + L_f2 L_g) D_X`.
    pub intrinsic: f64,
    /// `2 epsilon D_f`.
    pub privacy: f64,
    /// Set when `epsilon >= 1`, outside the range where `e^eps <= 1 + 2 eps`.
    pub linearization_exceeded: bool,
}

pub fn eta(epsilon: f64, constants: &ProblemConstants) -> EtaReport {
    let intrinsic = (constants.l_f1 + constants.l_f2 * constants.l_g) * constants.d_x;
    let privacy = 2.0 * epsilon * constants.d_f;
    EtaReport {
        eta: intrinsic + privacy,
        intrinsic,
        privacy,
        linearization_exceeded: epsilon >= 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseCalibration {
    pub sigma_xi: f64,
    pub sigma_zeta: f64,
    /// Budget recomputed with the returned bases.
    pub achieved: f64,
}

impl NoiseCalibration {
    /// Replaces every agent's noise bases, keeping the exponents.
    pub fn apply(&self, schedules: &ScheduleSet) -> ScheduleSet {
        let mut s = schedules.clone();
        s.noise.xi = s.noise.xi.with_base(self.sigma_xi);
        s.noise.zeta = s.noise.zeta.with_base(self.sigma_zeta);
        s.noise.enabled = true;
        s
    }
}

/// Noise bases that spend half of `target` on each mechanism over
/// `horizon`. The result never exceeds `target` after recomputation.
pub fn calibrate_noise(
    target: f64,
    horizon: Horizon,
    schedules: &ScheduleSet,
    w_hat: f64,
) -> Result<NoiseCalibration, PrivacyError> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(PrivacyError::NonPositiveTarget(target));
    }
    let unit = unit_noise(schedules);
    let base = epsilon(horizon, &unit, w_hat, false)?;
    // With unit bases each mechanism's budget is its full series sum; the
    // tail bound is split in proportion to the two tails.
    let (tail_psi, tail_y) = match horizon {
        Horizon::Finite(_) => (0.0, 0.0),
        Horizon::Infinite => (
            base.constants.psi.tail_after(base.terms),
            base.constants.y.tail_after(base.terms),
        ),
    };
    let mut cal = NoiseCalibration {
        sigma_xi: 2.0 * (base.epsilon_psi + tail_psi) / target,
        sigma_zeta: 2.0 * (base.epsilon_y + tail_y) / target,
        achieved: 0.0,
    };
    for _ in 0..8 {
        cal.achieved = epsilon(horizon, &cal.apply(schedules), w_hat, false)?.epsilon;
        if cal.achieved <= target {
            return Ok(cal);
        }
        let bump = cal.achieved / target * (1.0 + 4.0 * f64::EPSILON);
        cal.sigma_xi *= bump;
        cal.sigma_zeta *= bump;
    }
    Ok(cal)
}

fn unit_noise(schedules: &ScheduleSet) -> ScheduleSet {
    let mut s = schedules.clone();
    let unit = |p: &AgentProfiles| p.with_base(1.0);
    s.noise.xi = unit(&s.noise.xi);
    s.noise.zeta = unit(&s.noise.zeta);
    s.noise.enabled = true;
    s
}
