//! EV charging: `f_i = p(psi)^T (x_i + d_i)`, `g_i = (m / C)(x_i + d_i)`,
//! `X_i = {0 <= x <= x_max, 1^T x = E}`.

use serde::Deserialize;

use super::projection::project_box_budget;
use super::{AggregativeProblem, ProblemConstants, ProblemError};

pub const SLOTS: usize = 13;

const MODELS_CSV: &str = include_str!("../../data/ev_models.csv");
const DEMAND_CSV: &str = include_str!("../../data/demand_profile.csv");

/// Bundled overnight load, 21:00 through 09:00, in GW.
pub const DEMAND_PROFILE_GW: [f64; SLOTS] = [
    105.0, 100.0, 93.0, 86.0, 80.0, 76.0, 73.0, 72.0, 73.0, 77.0, 82.0, 88.0, 94.0,
];

const FULL_POPULATION: f64 = 1e7;
const FULL_CAPACITY_KW: f64 = 1.2e8;
const MARGIN: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EvModel {
    pub model: String,
    pub max_rate_kw: f64,
    pub battery_kwh: f64,
}

impl EvModel {
    pub fn parse_csv(text: &str) -> Result<Vec<Self>, ProblemError> {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<Vec<Self>, _>>()
            .map_err(|e| ProblemError::Parse(e.to_string()))
    }

    pub fn bundled() -> Vec<Self> {
        Self::parse_csv(MODELS_CSV).expect("bundled model table parses")
    }
}

#[derive(Debug, Deserialize)]
struct DemandRow {
    #[allow(dead_code)]
    hour: u32,
    load_gw: f64,
}

/// Reads a `hour,load_gw` table and checks it has one row per slot.
pub fn parse_demand_csv(text: &str) -> Result<Vec<f64>, ProblemError> {
    let rows: Vec<DemandRow> = csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| ProblemError::Parse(e.to_string()))?;
    if rows.len() != SLOTS {
        return Err(ProblemError::WrongLength {
            expected: SLOTS,
            got: rows.len(),
        });
    }
    Ok(rows.into_iter().map(|r| r.load_gw).collect())
}

/// `coef * r^exponent` on `[0, cap]`, zero below 0 and extended linearly
/// above `cap`. The extension keeps the slope, and hence `grad2 f`, bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceFunction {
    pub coef: f64,
    pub exponent: f64,
    pub cap: f64,
}

impl PriceFunction {
    pub fn value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else if r <= self.cap {
            self.coef * r.powf(self.exponent)
        } else {
            self.coef * self.cap.powf(self.exponent) + self.slope(self.cap) * (r - self.cap)
        }
    }

    pub fn slope(&self, r: f64) -> f64 {
        let r = r.clamp(0.0, self.cap);
        self.coef * self.exponent * r.powf(self.exponent - 1.0)
    }

    /// Second derivative on the interior of the power-law piece.
    pub fn curvature(&self, r: f64) -> f64 {
        if r <= 0.0 || r > self.cap {
            return 0.0;
        }
        self.coef * self.exponent * (self.exponent - 1.0) * r.powf(self.exponent - 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvChargingSpec {
    pub x_max: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub demand: Vec<Vec<f64>>,
    pub c_tot: f64,
    pub price_coef: f64,
    pub price_exponent: f64,
    /// Model index per agent, when built from the model table.
    pub group: Vec<usize>,
}

impl EvChargingSpec {
    pub fn new(
        x_max: Vec<Vec<f64>>,
        energy: Vec<f64>,
        demand: Vec<Vec<f64>>,
        c_tot: f64,
    ) -> Self {
        let m = energy.len();
        Self {
            x_max,
            energy,
            demand,
            c_tot,
            price_coef: 0.15,
            price_exponent: 1.5,
            group: vec![0; m],
        }
    }

    /// `m` EVs split evenly across the model table in order, each with the
    /// per-capita share of `profile_gw`. Capacity scales with `m`.
    pub fn from_tables(models: &[EvModel], profile_gw: &[f64], m: usize) -> Self {
        let per_ev: Vec<f64> = profile_gw
            .iter()
            .map(|gw| gw * 1e6 / FULL_POPULATION)
            .collect();
        let mut x_max = Vec::with_capacity(m);
        let mut energy = Vec::with_capacity(m);
        let mut group = Vec::with_capacity(m);
        for i in 0..m {
            let g = i * models.len() / m;
            x_max.push(vec![models[g].max_rate_kw; profile_gw.len()]);
            energy.push(models[g].battery_kwh);
            group.push(g);
        }
        Self {
            x_max,
            energy,
            demand: vec![per_ev; m],
            c_tot: FULL_CAPACITY_KW * m as f64 / FULL_POPULATION,
            price_coef: 0.15,
            price_exponent: 1.5,
            group,
        }
    }

    /// Bundled table and demand profile with `m` EVs.
    pub fn desk(m: usize) -> Self {
        let profile = parse_demand_csv(DEMAND_CSV).expect("bundled profile parses");
        Self::from_tables(&EvModel::bundled(), &profile, m)
    }

    pub fn agents(&self) -> usize {
        self.energy.len()
    }

    pub fn slots(&self) -> usize {
        self.demand.first().map_or(0, Vec::len)
    }

    /// Agents belonging to model group `g`.
    pub fn group_members(&self, g: usize) -> Vec<usize> {
        (0..self.agents()).filter(|&i| self.group[i] == g).collect()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let m = self.agents();
        if m == 0 {
            return Err(ProblemError::Empty);
        }
        let k = self.slots();
        for i in 0..m {
            for (v, what) in [(&self.x_max[i], "x_max"), (&self.demand[i], "demand")] {
                if v.len() != k {
                    return Err(ProblemError::WrongLength {
                        expected: k,
                        got: v.len(),
                    });
                }
                if let Some(slot) = v.iter().position(|a| *a < 0.0) {
                    return Err(ProblemError::NegativeInput {
                        what,
                        agent: i,
                        slot,
                    });
                }
            }
            let capacity: f64 = self.x_max[i].iter().sum();
            if self.energy[i] < 0.0 || self.energy[i] > capacity {
                return Err(ProblemError::InfeasibleSpec {
                    agent: i,
                    energy: self.energy[i],
                    capacity,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvProblem {
    spec: EvChargingSpec,
    scale: f64,
    price: PriceFunction,
    load_floor: f64,
    load_top: f64,
    constants: ProblemConstants,
}

impl EvProblem {
    pub fn new(spec: EvChargingSpec) -> Result<Self, ProblemError> {
        Self::build(spec, None)
    }

    /// `price` defaults to a power law capped at the largest reachable load.
    fn build(spec: EvChargingSpec, price: Option<PriceFunction>) -> Result<Self, ProblemError> {
        spec.validate()?;
        let m = spec.agents();
        let scale = m as f64 / spec.c_tot;
        // Hull of every g_i range over X_i.
        let mut load_floor = f64::INFINITY;
        let mut load_cap: f64 = 0.0;
        for i in 0..m {
            for k in 0..spec.slots() {
                load_floor = load_floor.min(scale * spec.demand[i][k]);
                load_cap = load_cap.max(scale * (spec.x_max[i][k] + spec.demand[i][k]));
            }
        }
        let price = price.unwrap_or(PriceFunction {
            coef: spec.price_coef,
            exponent: spec.price_exponent,
            cap: load_cap,
        });
        let top = load_cap.max(price.cap);
        let constants = Self::compute_constants(&spec, scale, &price, load_floor, top);
        Ok(Self {
            spec,
            scale,
            price,
            load_floor,
            load_top: top,
            constants,
        })
    }

    /// Closed-form bounds over `X_i` and `psi` in the load hull, plus 10%:
    /// - `|grad1 f| = |p(psi)| <= sqrt(K) p(cap)`
    /// - `|grad2 f| = |p'(psi) (x + d)| <= p'(cap) max_i |x_max + d|`, global
    ///   because `p'` is capped
    /// - `grad f` moves with `x` through `p'(psi)` only
    /// - `grad f` moves with `psi` through `p'` and `p''`, with `p''` largest
    ///   at the load floor
    fn compute_constants(
        spec: &EvChargingSpec,
        scale: f64,
        price: &PriceFunction,
        load_floor: f64,
        cap: f64,
    ) -> ProblemConstants {
        let k = spec.slots() as f64;
        let m = spec.agents();
        let peak: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                spec.x_max[i]
                    .iter()
                    .zip(&spec.demand[i])
                    .map(|(a, b)| a + b)
                    .collect()
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let max_peak_norm = peak.iter().map(|v| norm(v)).fold(0.0, f64::max);
        let max_peak_entry = peak.iter().flatten().copied().fold(0.0, f64::max);
        let slope_cap = price.slope(cap);
        let curv = price.curvature(load_floor.max(1e-12));
        ProblemConstants {
            l_f1: MARGIN * k.sqrt() * price.value(cap),
            l_f2: MARGIN * slope_cap * max_peak_norm,
            l_f1_bar: MARGIN * slope_cap,
            l_f2_bar: MARGIN * (slope_cap.powi(2) + (curv * max_peak_entry).powi(2)).sqrt(),
            l_g: scale,
            l_g_bar: 0.0,
            mu: 0.0,
            d_x: spec.x_max.iter().map(|v| v.iter().map(|a| a * a).sum::<f64>()).sum::<f64>().sqrt(),
            d_f: peak
                .iter()
                .map(|v| price.value(cap) * v.iter().sum::<f64>())
                .fold(0.0, f64::max),
            d_g: scale * max_peak_norm,
        }
    }

    pub fn spec(&self) -> &EvChargingSpec {
        &self.spec
    }

    pub fn price(&self) -> &PriceFunction {
        &self.price
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Price vector `p(psi)`.
    pub fn prices(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter().map(|r| self.price.value(*r)).collect()
    }

    /// Same instance with agent `i`'s demand replaced. The price function
    /// is kept, so only entry `i` of the problem changes.
    pub fn with_demand(&self, agent: usize, demand: Vec<f64>) -> Result<Self, ProblemError> {
        let mut spec = self.spec.clone();
        spec.demand[agent] = demand;
        Self::build(spec, Some(self.price))
    }
}

impl AggregativeProblem for EvProblem {
    fn num_agents(&self) -> usize {
        self.spec.agents()
    }

    fn dim_x(&self, _agent: usize) -> usize {
        self.spec.slots()
    }

    fn dim_agg(&self) -> usize {
        self.spec.slots()
    }

    fn f(&self, i: usize, x: &[f64], psi: &[f64]) -> f64 {
        let d = &self.spec.demand[i];
        (0..x.len())
            .map(|k| self.price.value(psi[k]) * (x[k] + d[k]))
            .sum()
    }

    fn grad1_f(&self, _i: usize, _x: &[f64], psi: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(psi) {
            *o = self.price.value(*r);
        }
    }

    fn grad2_f(&self, i: usize, x: &[f64], psi: &[f64], out: &mut [f64]) {
        let d = &self.spec.demand[i];
        for k in 0..out.len() {
            out[k] = self.price.slope(psi[k]) * (x[k] + d[k]);
        }
    }

    fn g(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let d = &self.spec.demand[i];
        for k in 0..out.len() {
            out[k] = self.scale * (x[k] + d[k]);
        }
    }

    fn jac_g_times(&self, _i: usize, _x: &[f64], v: &[f64], out: &mut [f64]) {
        for (o, a) in out.iter_mut().zip(v) {
            *o = self.scale * a;
        }
    }

    fn project(&self, i: usize, point: &[f64], out: &mut [f64]) {
        project_box_budget(point, &self.spec.x_max[i], self.spec.energy[i], out)
            .expect("energy validated at construction");
    }

    fn constants(&self) -> ProblemConstants {
        self.constants
    }

    fn x_box(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.spec.slots()], self.spec.x_max[i].clone())
    }

    fn psi_box(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.spec.slots();
        (vec![self.load_floor; k], vec![self.load_top; k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{aggregate, global_cost, Stacked};

    fn unit_pair() -> EvProblem {
        let spec = EvChargingSpec::new(
            vec![vec![1.0; SLOTS]; 2],
            vec![6.5; 2],
            vec![vec![0.5; SLOTS]; 2],
            2.0,
        );
        EvProblem::new(spec).unwrap()
    }

    #[test]
    fn price_at_unit_load() {
        let p = unit_pair();
        let prices = p.prices(&[1.0; SLOTS]);
        assert!(prices.iter().all(|v| (*v - 0.15).abs() < 1e-15));
    }

    #[test]
    fn zero_load_has_zero_slope() {
        let p = unit_pair();
        let mut out = [1.0; SLOTS];
        p.grad2_f(0, &[0.3; SLOTS], &[0.0; SLOTS], &mut out);
        assert_eq!(out, [0.0; SLOTS]);
    }

    #[test]
    fn two_agent_cost() {
        let p = unit_pair();
        let x: Stacked = vec![vec![0.5; SLOTS]; 2];
        let phi = aggregate(&p, &x);
        assert!(phi.iter().all(|v| (*v - 1.0).abs() < 1e-15));
        assert!((global_cost(&p, &x) - 3.9).abs() < 1e-12);
    }

    #[test]
    fn infeasible_energy_rejected() {
        let spec = EvChargingSpec::new(
            vec![vec![1.0; SLOTS]],
            vec![14.0],
            vec![vec![0.0; SLOTS]],
            1.0,
        );
        assert!(matches!(
            EvProblem::new(spec),
            Err(ProblemError::InfeasibleSpec { .. })
        ));
    }

    #[test]
    fn desk_instance_shape() {
        let spec = EvChargingSpec::desk(20);
        assert_eq!(spec.agents(), 20);
        assert_eq!(spec.slots(), 13);
        assert_eq!(spec.c_tot, 240.0);
        assert_eq!(spec.group_members(2), vec![4, 5]);
        assert!((spec.demand[0][0] - 10.5).abs() < 1e-12);
        let p = EvProblem::new(spec).unwrap();
        assert!((p.scale() - 1.0 / 12.0).abs() < 1e-15);
        let (lo, hi) = p.psi_box();
        assert!((lo[0] - 0.6).abs() < 1e-12);
        assert!((hi[0] - 32.5 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn demand_table_checks_length() {
        assert!(matches!(
            parse_demand_csv("hour,load_gw\n1,2\n"),
            Err(ProblemError::WrongLength { .. })
        ));
        assert_eq!(
            parse_demand_csv(DEMAND_CSV).unwrap(),
            DEMAND_PROFILE_GW.to_vec()
        );
    }

    #[test]
    fn price_extension_is_c1() {
        let pf = PriceFunction {
            coef: 0.15,
            exponent: 1.5,
            cap: 2.0,
        };
        let h = 1e-7;
        let left = (pf.value(2.0) - pf.value(2.0 - h)) / h;
        let right = (pf.value(2.0 + h) - pf.value(2.0)) / h;
        assert!((left - right).abs() < 1e-6);
        assert!((right - pf.slope(2.0)).abs() < 1e-6);
        assert_eq!(pf.value(-1.0), 0.0);
    }

    #[test]
    fn grad2_bounded_everywhere() {
        let p = EvProblem::new(EvChargingSpec::desk(20)).unwrap();
        let c = p.constants();
        let xmax = p.spec().x_max[0].clone();
        let mut out = vec![0.0; SLOTS];
        for r in [-5.0, 0.0, 0.7, 2.7, 50.0, 1e6] {
            p.grad2_f(0, &xmax, &[r; SLOTS], &mut out);
            let n = out.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(n <= c.l_f2, "{n} > {}", c.l_f2);
        }
    }

    #[test]
    fn misreport_keeps_shared_price() {
        let p = EvProblem::new(EvChargingSpec::desk(20)).unwrap();
        let mut d = p.spec().demand[4].clone();
        d[5] += 30.0;
        let q = p.with_demand(4, d.clone()).unwrap();
        assert_eq!(q.price(), p.price());
        assert_eq!(q.spec().demand[4], d);
        assert_eq!(q.spec().demand[5], p.spec().demand[5]);
        assert!(q.psi_box().1[0] > p.psi_box().1[0]);
    }
}
