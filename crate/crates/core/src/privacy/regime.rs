//! Parameter-regime conditions of the convergence and truthfulness theorems.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schedules::ScheduleSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    StronglyConvex,
    Convex,
    Nonconvex,
    Truthful,
    TruthfulStronglyConvex,
    TruthfulConvex,
    TruthfulNonconvex,
}

impl Regime {
    pub const ALL: [Regime; 7] = [
        Regime::StronglyConvex,
        Regime::Convex,
        Regime::Nonconvex,
        Regime::Truthful,
        Regime::TruthfulStronglyConvex,
        Regime::TruthfulConvex,
        Regime::TruthfulNonconvex,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Regime::StronglyConvex => "T1-strongly-convex",
            Regime::Convex => "T1-convex",
            Regime::Nonconvex => "T1-nonconvex",
            Regime::Truthful => "T2-truthful",
            Regime::TruthfulStronglyConvex => "T3-sc",
            Regime::TruthfulConvex => "T3-convex",
            Regime::TruthfulNonconvex => "T3-nonconvex",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One strict inequality `left > right`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Inequality {
    pub name: String,
    pub left: f64,
    pub right: f64,
    pub satisfied: bool,
}

impl Inequality {
    fn new(name: impl Into<String>, left: f64, right: f64) -> Self {
        Self {
            name: name.into(),
            left,
            right,
            satisfied: left > right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeConditions {
    pub regime: Regime,
    pub checks: Vec<Inequality>,
}

impl RegimeConditions {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Inequality> {
        self.checks.iter().filter(|c| !c.satisfied)
    }
}

impl fmt::Display for RegimeConditions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passes() { "pass" } else { "FAIL" };
        writeln!(f, "{}: {verdict}", self.regime)?;
        for c in &self.checks {
            let mark = if c.satisfied { "ok" } else { "violated" };
            writeln!(f, "  {:<28} {:>10.6} > {:<10.6} {mark}", c.name, c.left, c.right)?;
        }
        Ok(())
    }
}

/// Decay exponents as the theorems see them: the `min` noise rates enter
/// the convergence results, the `max` rates the privacy results.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Rates {
    u: f64,
    v: f64,
    w1: f64,
    w2: f64,
    sz_min: f64,
    sx_min: f64,
    sz_max: f64,
    sx_max: f64,
}

impl Rates {
    fn of(s: &ScheduleSet) -> Self {
        Self {
            u: s.lambda.exponent,
            v: s.alpha.exponent,
            w1: s.gamma1.exponent,
            w2: s.gamma2.exponent,
            sz_min: s.noise.zeta.min_exponent(),
            sx_min: s.noise.xi.min_exponent(),
            sz_max: s.noise.zeta.max_exponent(),
            sx_max: s.noise.xi.max_exponent(),
        }
    }
}

fn noise_range(r: &Rates, out: &mut Vec<Inequality>) {
    out.push(Inequality::new("min ς_ζ > 0", r.sz_min, 0.0));
    out.push(Inequality::new("1 > max ς_ζ", 1.0, r.sz_max));
    out.push(Inequality::new("min ς_ξ > 0", r.sx_min, 0.0));
    out.push(Inequality::new("1 > max ς_ξ", 1.0, r.sx_max));
}

fn theorem1(regime: Regime, r: &Rates) -> Vec<Inequality> {
    let mut c = Vec::new();
    noise_range(r, &mut c);
    let (sz, sx) = (r.sz_min, r.sx_min);
    let half_w2 = r.w2 / 2.0;
    // `shift` is the extra slack the convex and nonconvex cases demand.
    let shift = match regime {
        Regime::StronglyConvex => {
            c.push(Inequality::new("1 > u", 1.0, r.u));
            c.push(Inequality::new("u > w2", r.u, r.w2));
            c.push(Inequality::new("1 > v", 1.0, r.v));
            c.push(Inequality::new("v > w2", r.v, r.w2));
            0.0
        }
        Regime::Convex => {
            c.push(Inequality::new("1 > u", 1.0, r.u));
            c.push(Inequality::new("u > (1+w2)/2", r.u, (1.0 + r.w2) / 2.0));
            c.push(Inequality::new("1 > v", 1.0, r.v));
            c.push(Inequality::new("v > 1-u+w2", r.v, 1.0 - r.u + r.w2));
            1.0 - r.u
        }
        _ => {
            c.push(Inequality::new("1 > u", 1.0, r.u));
            c.push(Inequality::new(
                "u > max(1/2, (1+2w2)/3)",
                r.u,
                0.5f64.max((1.0 + 2.0 * r.w2) / 3.0),
            ));
            c.push(Inequality::new("1 > v", 1.0, r.v));
            c.push(Inequality::new("v > (1-u)/2+w2", r.v, (1.0 - r.u) / 2.0 + r.w2));
            (1.0 - r.u) / 2.0
        }
    };
    c.push(Inequality::new("1 > w1", 1.0, r.w1));
    c.push(Inequality::new("1 > w2", 1.0, r.w2));
    c.push(Inequality::new(
        "ς_ζ > shift+max(w1, w2/2)",
        sz,
        shift + r.w1.max(half_w2),
    ));
    c.push(Inequality::new("ς_ξ > shift+v/2-w2", sx, shift + r.v / 2.0 - r.w2));
    c
}

fn theorem2(r: &Rates) -> Vec<Inequality> {
    let mut c = Vec::new();
    noise_range(r, &mut c);
    c.push(Inequality::new(
        "u > w1+w2+max ς_ξ+1",
        r.u,
        r.w1 + r.w2 + r.sx_max + 1.0,
    ));
    c.push(Inequality::new("v > u-w1", r.v, r.u - r.w1));
    c.push(Inequality::new("w1 > 1+max ς_ζ", r.w1, 1.0 + r.sz_max));
    c.push(Inequality::new("1 > w2", 1.0, r.w2));
    c
}

fn theorem3(regime: Regime, r: &Rates) -> Vec<Inequality> {
    let mut c = theorem2(r);
    let (sz, sx) = (r.sz_min, r.sx_min);
    match regime {
        Regime::TruthfulStronglyConvex => {
            c.push(Inequality::new("v > 1", r.v, 1.0));
            c.push(Inequality::new(
                "ς_ζ > max(0, (1-u)/2+w1)",
                sz,
                0f64.max((1.0 - r.u) / 2.0 + r.w1),
            ));
        }
        Regime::TruthfulConvex => {
            c.push(Inequality::new("v > 1", r.v, 1.0));
            c.push(Inequality::new("ς_ζ > max(0, 1-u+w1)", sz, 0f64.max(1.0 - r.u + r.w1)));
        }
        _ => {
            c.push(Inequality::new("v > max(1, u-w1)", r.v, 1f64.max(r.u - r.w1)));
            c.push(Inequality::new(
                "ς_ζ > max(0, (1-u)/2+w1)",
                sz,
                0f64.max((1.0 - r.u) / 2.0 + r.w1),
            ));
        }
    }
    c.push(Inequality::new("1 > ς_ξ", 1.0, sx));
    c.push(Inequality::new(
        "ς_ξ > max(-w2/2, 1/2-w2)",
        sx,
        (-r.w2 / 2.0).max(0.5 - r.w2),
    ));
    c
}

/// Evaluates every inequality of `regime` against the schedule exponents.
pub fn check_regime(schedules: &ScheduleSet, regime: Regime) -> RegimeConditions {
    let r = Rates::of(schedules);
    let checks = match regime {
        Regime::StronglyConvex | Regime::Convex | Regime::Nonconvex => theorem1(regime, &r),
        Regime::Truthful => theorem2(&r),
        _ => theorem3(regime, &r),
    };
    RegimeConditions { regime, checks }
}
