//! One-shot reports behind the CLI: privacy accounting, gradient checks,
//! graph validation and the sequence-bound property.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::network::{validate_assumption2, validate_with_band, SpectralBand, Topology};
use crate::privacy::{
    calibrate_noise, check_lemma2, check_regime, epsilon, eta, EtaReport, Horizon, Lemma2Part,
    Lemma2Summary, NoiseCalibration, PrivacyReport, Regime, RegimeConditions,
};
use crate::problems::{finite_diff_check, sample_interior, AggregativeProblem, GradientKind};
use crate::rng::{Purpose, StreamKey};

use super::output::{write_file, write_manifest};
use super::{ExperimentConfig, HarnessError, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyExperimentReport {
    pub preset: String,
    pub w_hat: f64,
    pub regimes: Vec<RegimeConditions>,
    /// One entry per finite horizon, then the unbounded sum.
    pub budgets: Vec<PrivacyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<EtaReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<NoiseCalibration>,
    /// Why no budget could be computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PrivacyExperimentReport {
    pub fn outcome(&self) -> Outcome {
        match &self.error {
            Some(e) => Outcome::AssertionFailed(vec![e.clone()]),
            None => Outcome::Success,
        }
    }
}

impl fmt::Display for PrivacyExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "schedules: {}  (w_hat = {})", self.preset, self.w_hat)?;
        for r in &self.regimes {
            write!(f, "{r}")?;
        }
        if let Some(e) = &self.error {
            writeln!(f, "budget: unavailable ({e})")?;
        }
        if let Some(b) = self.budgets.first() {
            writeln!(f, "c1 = {}  c2 = {}", b.constants.c1, b.constants.c2)?;
        }
        for b in &self.budgets {
            let h = match b.horizon {
                Horizon::Finite(t) => t.to_string(),
                Horizon::Infinite => "inf".into(),
            };
            writeln!(
                f,
                "epsilon(T={h}) = {:.12e}  [psi {:.6e}, y {:.6e}, tail {:.3e}, terms {}]",
                b.epsilon, b.epsilon_psi, b.epsilon_y, b.tail_bound, b.terms
            )?;
        }
        if let Some(e) = &self.eta {
            writeln!(
                f,
                "eta = {:.6e}  (intrinsic {:.6e}, privacy {:.6e}{})",
                e.eta,
                e.intrinsic,
                e.privacy,
                if e.linearization_exceeded { ", epsilon >= 1: linearization does not hold" } else { "" }
            )?;
        }
        if let Some(c) = &self.calibration {
            writeln!(
                f,
                "calibrated noise: sigma_xi = {:.6e}, sigma_zeta = {:.6e}, achieved epsilon = {:.12e}",
                c.sigma_xi, c.sigma_zeta, c.achieved
            )?;
        }
        Ok(())
    }
}

/// Regime tables, budgets at the configured horizons and at infinity,
/// `eta` for the configured problem and an optional noise calibration.
/// Writes `privacy.toml` and a manifest when `dir` is given.
pub fn privacy_report(
    config: &ExperimentConfig,
    dir: Option<&Path>,
) -> Result<PrivacyExperimentReport, HarnessError> {
    let schedules = config.schedule_set()?;
    let w_hat = match config.privacy.w_hat {
        Some(w) => w,
        None => config.build_weights(config.topology.seed)?.w_hat(),
    };
    let regimes = Regime::ALL.iter().map(|r| check_regime(&schedules, *r)).collect();
    let mut report = PrivacyExperimentReport {
        preset: config.schedules.preset.clone(),
        w_hat,
        regimes,
        budgets: Vec::new(),
        eta: None,
        calibration: None,
        error: None,
    };
    let horizons = config
        .privacy
        .horizons
        .iter()
        .map(|t| Horizon::Finite(*t))
        .chain([Horizon::Infinite]);
    for h in horizons {
        match epsilon(h, &schedules, w_hat, false) {
            Ok(b) => report.budgets.push(b),
            Err(e) => {
                report.error = Some(e.to_string());
                break;
            }
        }
    }
    if let Some(last) = report.budgets.last() {
        let problem = config.build_problem()?;
        report.eta = Some(eta(last.epsilon, &problem.as_dyn().constants()));
    }
    if let (Some(target), None) = (config.privacy.target_epsilon, &report.error) {
        let h = match config.privacy.horizons.first() {
            Some(t) => Horizon::Finite(*t),
            None => Horizon::Infinite,
        };
        report.calibration = Some(calibrate_noise(target, h, &schedules, w_hat)?);
    }
    if let Some(dir) = dir {
        write_file(&dir.join("privacy.toml"), toml::to_string(&report).expect("report serializes"))?;
        write_file(&dir.join("privacy.txt"), report.to_string())?;
        write_manifest(config, dir, &["privacy.toml".into(), "privacy.txt".into()], vec![])?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckSummary {
    pub points: usize,
    pub step: f64,
    pub max_rel_error: f64,
    /// `grad1 f`, `grad2 f`, `grad g` maxima.
    pub per_kind: [f64; 3],
    pub worst_kind: String,
    pub worst_agent: usize,
    pub tolerance: f64,
}

impl GradcheckSummary {
    pub fn passes(&self) -> bool {
        self.max_rel_error < self.tolerance
    }

    pub fn outcome(&self) -> Outcome {
        if self.passes() {
            Outcome::Success
        } else {
            Outcome::AssertionFailed(vec![format!(
                "max relative error {:e} in {} of agent {} is not below {:e}",
                self.max_rel_error, self.worst_kind, self.worst_agent, self.tolerance
            )])
        }
    }
}

impl fmt::Display for GradcheckSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} points, step {:e}", self.points, self.step)?;
        writeln!(
            f,
            "max relative error: grad1 f {:.3e}, grad2 f {:.3e}, grad g {:.3e}",
            self.per_kind[0], self.per_kind[1], self.per_kind[2]
        )?;
        writeln!(
            f,
            "worst: {:.3e} ({} of agent {}), tolerance {:e}: {}",
            self.max_rel_error,
            self.worst_kind,
            self.worst_agent,
            self.tolerance,
            if self.passes() { "pass" } else { "FAIL" }
        )
    }
}

/// Central-difference check at `points` seeded interior points.
pub fn check_gradients(
    problem: &dyn AggregativeProblem,
    points: usize,
    step: f64,
    seed: u64,
    tolerance: f64,
) -> Result<GradcheckSummary, HarnessError> {
    let mut s = GradcheckSummary {
        points,
        step,
        max_rel_error: 0.0,
        per_kind: [0.0; 3],
        worst_kind: String::new(),
        worst_agent: 0,
        tolerance,
    };
    for k in 0..points as u64 {
        let mut rng = StreamKey::new(seed, Purpose::Property, k).rng();
        let (x, psi) = sample_interior(problem, &mut rng);
        let r = finite_diff_check(problem, &x, &psi, step)?;
        for j in 0..3 {
            s.per_kind[j] = s.per_kind[j].max(r.per_kind[j]);
        }
        if r.max_rel_error >= s.max_rel_error {
            s.max_rel_error = r.max_rel_error;
            s.worst_agent = r.agent;
            s.worst_kind = match r.kind {
                GradientKind::Grad1F => "grad1 f",
                GradientKind::Grad2F => "grad2 f",
                GradientKind::JacG => "grad g",
            }
            .into();
        }
    }
    Ok(s)
}

pub fn gradcheck_report(
    config: &ExperimentConfig,
    dir: Option<&Path>,
) -> Result<GradcheckSummary, HarnessError> {
    let g = &config.gradcheck;
    let problem = config.build_problem()?;
    let s = check_gradients(problem.as_dyn(), g.points, g.step, g.seed, g.tolerance)?;
    if let Some(dir) = dir {
        write_file(&dir.join("gradcheck.toml"), toml::to_string(&s).expect("summary serializes"))?;
        write_manifest(config, dir, &["gradcheck.toml".into()], vec![])?;
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphReport {
    pub agents: usize,
    pub edges: usize,
    pub max_degree: usize,
    pub connected: bool,
    pub weight: f64,
    pub band: SpectralBand,
    pub eigenvalues: Vec<f64>,
    /// Violations of the requested band; empty when `W` is admissible.
    pub band_violations: Vec<String>,
    /// Violations of the strict `(-1, 0)` band.
    pub strict_violations: Vec<String>,
}

impl GraphReport {
    pub fn passes(&self) -> bool {
        self.connected && self.band_violations.is_empty()
    }

    pub fn outcome(&self) -> Outcome {
        if self.passes() {
            Outcome::Success
        } else {
            let mut msgs = self.band_violations.clone();
            if !self.connected {
                msgs.insert(0, "graph is disconnected".into());
            }
            Outcome::AssertionFailed(msgs)
        }
    }
}

impl fmt::Display for GraphReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} agents, {} edges, max degree {}, {}",
            self.agents,
            self.edges,
            self.max_degree,
            if self.connected { "connected" } else { "DISCONNECTED" }
        )?;
        if let (Some(hi), Some(lo)) = (self.eigenvalues.get(1), self.eigenvalues.last()) {
            writeln!(f, "edge weight {}: delta_2 = {hi:.6}, delta_min = {lo:.6}", self.weight)?;
        }
        let list = |v: &[String]| if v.is_empty() { "ok".to_string() } else { v.join("; ") };
        writeln!(f, "band {:?}: {}", self.band, list(&self.band_violations))?;
        writeln!(f, "strict band (-1, 0): {}", list(&self.strict_violations))
    }
}

/// Uniform-weight Laplacian-type `W` of `topology` checked against `band`
/// and against the strict band.
pub fn validate_graph(topology: &Topology, weight: f64, band: SpectralBand) -> GraphReport {
    let m = topology.len();
    let mut w = DMatrix::zeros(m, m);
    for i in 0..m {
        for &j in topology.neighbors(i) {
            w[(i, j)] = weight;
        }
        w[(i, i)] = -(topology.degree(i) as f64) * weight;
    }
    let strings = |r: Result<crate::network::SpectralCertificate, Vec<crate::network::Violation>>| match r {
        Ok(_) => Vec::new(),
        Err(v) => v.iter().map(|x| x.to_string()).collect(),
    };
    let mut eig: Vec<f64> = w.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    GraphReport {
        agents: m,
        edges: topology.edges().len(),
        max_degree: topology.max_degree(),
        connected: topology.is_connected(),
        weight,
        band,
        eigenvalues: eig,
        band_violations: strings(validate_with_band(&w, band)),
        strict_violations: strings(validate_assumption2(&w)),
    }
}

/// Runs the sequence-bound property over `draws` seeded parameter sets
/// per bound.
pub fn check_lemma2_bounds(draws: usize, horizon: u64, seed: u64) -> Lemma2Summary {
    check_lemma2(draws.max(1), horizon, seed)
}

/// Plain-text digest of a [`Lemma2Summary`].
pub fn lemma2_digest(s: &Lemma2Summary) -> String {
    let mut out = format!(
        "{} draws per bound, horizon {}, {} candidates rejected by the hypothesis filter\n",
        s.draws, s.horizon, s.rejected
    );
    for (part, name) in [
        (Lemma2Part::Polynomial, "polynomial bound c b_t / a_t"),
        (Lemma2Part::Summable, "summable bound Phi_0 exp(..) + b0"),
    ] {
        let bad: Vec<_> = s.violations(part).collect();
        out += &format!("{name}: {} violations\n", bad.len());
        if let Some(first) = bad.first() {
            let v = first.violation.expect("filtered on violations");
            out += &format!(
                "  first: a0={:.4} a={:.4} b0={:.4} b={:.4} phi0={:.4} -> Phi_{} = {:.6e} > {:.6e}\n",
                first.params.a0, first.params.a, first.params.b0, first.params.b, first.params.phi0, v.t, v.value, v.bound
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentKind;

    #[test]
    fn ring_of_six_passes_strict_band() {
        let r = validate_graph(&Topology::ring(6), 0.2, SpectralBand::Strict);
        assert!(r.passes(), "{r}");
        assert!(r.strict_violations.is_empty());
    }

    #[test]
    fn complete_three_with_large_weight_fails() {
        let r = validate_graph(&Topology::complete(3), 0.6, SpectralBand::Strict);
        assert!(!r.passes());
        assert_eq!(r.outcome().exit_code(), 2);
    }

    #[test]
    fn literal_truthful_preset_reports_the_denominator() {
        let c = ExperimentConfig::template(ExperimentKind::PrivacyReport);
        let r = privacy_report(&c, None).unwrap();
        assert!(r.budgets.is_empty());
        assert!(r.error.as_deref().unwrap().contains("does not exceed"));
        assert_eq!(r.outcome().exit_code(), 2);
        assert!(r.regimes.iter().find(|g| g.regime == Regime::Truthful).unwrap().passes());
    }

    #[test]
    fn desk_preset_budget_and_calibration() {
        let mut c = ExperimentConfig::template(ExperimentKind::PrivacyReport);
        c.schedules.preset = "truthful-desk".into();
        let r = privacy_report(&c, None).unwrap();
        assert_eq!(r.budgets.len(), 3);
        assert!(r.budgets[0].epsilon < r.budgets[1].epsilon);
        let cal = r.calibration.as_ref().unwrap();
        assert!(cal.achieved <= 0.5 && cal.achieved >= 0.5 * (1.0 - 1e-9));
        assert!(r.to_string().contains("eta ="));
    }

    #[test]
    fn lemma2_digest_counts() {
        let s = check_lemma2_bounds(10, 100, 1);
        let d = lemma2_digest(&s);
        assert!(d.starts_with("10 draws per bound"));
    }
}
