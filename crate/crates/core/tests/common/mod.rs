//! Helpers shared by the integration tests.
#![allow(dead_code)]

use astro_float::{BigFloat, Consts, Radix, RoundingMode};

const PREC: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

fn big(v: f64) -> BigFloat {
    BigFloat::from_f64(v, PREC)
}

fn to_f64(v: &BigFloat, cc: &mut Consts) -> f64 {
    v.format(Radix::Dec, RM, cc).unwrap().parse().unwrap()
}

/// Inputs of the budget series, all as the f64 values the library sees.
#[derive(Debug, Clone, Copy)]
pub struct BudgetInputs {
    pub lambda0: f64,
    pub u: f64,
    pub gamma1: f64,
    pub w1: f64,
    pub gamma2: f64,
    pub w2: f64,
    pub sigma_xi: f64,
    pub varsigma_xi: f64,
    pub sigma_zeta: f64,
    pub varsigma_zeta: f64,
    pub w_hat: f64,
}

/// Budget series summed term by term in 256-bit arithmetic, with its own
/// evaluation of both constants.
pub fn epsilon_256(k: &BudgetInputs, horizon: u64) -> f64 {
    let mut cc = Consts::new().unwrap();
    let one = big(1.0);
    let two = big(2.0);
    let sqrt2 = two.sqrt(PREC, RM);
    let a0 = big(k.w_hat).mul(&big(k.gamma2), PREC, RM);
    let gap = big(k.u).sub(&big(k.w1), PREC, RM).sub(&big(k.w2), PREC, RM);
    let c1 = a0.div(&a0.sub(&gap, PREC, RM), PREC, RM);
    let e = one.exp(PREC, RM, &mut cc);
    let log = two
        .div(&two.sub(&big(k.w_hat), PREC, RM), PREC, RM)
        .ln(PREC, RM, &mut cc);
    let w1 = big(k.w1);
    let c2 = big(4.0)
        .mul(&w1, PREC, RM)
        .div(&e.mul(&log, PREC, RM), PREC, RM)
        .pow(&w1, PREC, RM, &mut cc)
        .mul(&two, PREC, RM)
        .div(&big(k.w_hat), PREC, RM);
    let coef_psi = sqrt2
        .mul(&c1, PREC, RM)
        .mul(&big(k.lambda0), PREC, RM)
        .div(
            &big(k.sigma_xi)
                .mul(&big(k.gamma1), PREC, RM)
                .mul(&big(k.gamma2), PREC, RM),
            PREC,
            RM,
        );
    let p_psi = gap.sub(&big(k.varsigma_xi), PREC, RM).neg();
    let coef_y = sqrt2
        .mul(&c2, PREC, RM)
        .mul(&big(k.gamma1), PREC, RM)
        .div(&big(k.sigma_zeta), PREC, RM);
    let p_y = w1.sub(&big(k.varsigma_zeta), PREC, RM).neg();
    let mut sum = big(0.0);
    for t in 1..=horizon {
        let base = BigFloat::from_u64(t + 1, PREC);
        let lb = base.ln(PREC, RM, &mut cc);
        let a = coef_psi.mul(&lb.mul(&p_psi, PREC, RM).exp(PREC, RM, &mut cc), PREC, RM);
        let b = coef_y.mul(&lb.mul(&p_y, PREC, RM).exp(PREC, RM, &mut cc), PREC, RM);
        sum = sum.add(&a, PREC, RM).add(&b, PREC, RM);
    }
    to_f64(&sum, &mut cc)
}
