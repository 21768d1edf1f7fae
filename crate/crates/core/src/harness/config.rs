//! TOML experiment configuration with every default spelled out.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::network::{build_weight_matrix, generate_k_regular, SpectralBand, Topology, WeightMatrix};
use crate::problems::{
    AggregativeProblem, EvChargingSpec, EvModel, EvProblem, SyntheticKind, SyntheticProblem,
    SyntheticSpec,
};
use crate::schedules::{ScheduleParams, ScheduleSet, PRESET_NAMES};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Convergence,
    Robustness,
    Truthfulness,
    PrivacyReport,
    Gradcheck,
    ValidateGraph,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Convergence,
        ExperimentKind::Robustness,
        ExperimentKind::Truthfulness,
        ExperimentKind::PrivacyReport,
        ExperimentKind::Gradcheck,
        ExperimentKind::ValidateGraph,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Robustness => "robustness",
            ExperimentKind::Truthfulness => "truthfulness",
            ExperimentKind::PrivacyReport => "privacy-report",
            ExperimentKind::Gradcheck => "gradcheck",
            ExperimentKind::ValidateGraph => "validate-graph",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemFamily {
    Ev,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub family: ProblemFamily,
    pub agents: usize,
    /// Synthetic only.
    pub synthetic_kind: SyntheticKind,
    pub dim_x: usize,
    pub dim_agg: usize,
    pub instance_seed: u64,
    pub half_width: f64,
    pub kappa: f64,
    /// EV only: replacement model table and demand profile.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub models_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demand_csv: Option<PathBuf>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        Self {
            family: ProblemFamily::Ev,
            agents: 20,
            synthetic_kind: s.kind,
            dim_x: s.dim_x,
            dim_agg: s.dim_agg,
            instance_seed: s.seed,
            half_width: s.half_width,
            kappa: s.kappa,
            models_csv: None,
            demand_csv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    KRegular,
    Ring,
    Path,
    Complete,
    EdgeList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub degree: usize,
    pub seed: u64,
    /// Adds the run seed to `seed`, giving each run its own graph.
    pub vary_with_seed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_list: Option<PathBuf>,
    pub weight: f64,
    pub band: SpectralBand,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            kind: TopologyKind::KRegular,
            degree: 4,
            seed: 0,
            vary_with_seed: false,
            edge_list: None,
            weight: 0.2,
            band: SpectralBand::Contractive,
        }
    }
}

/// A preset with optional per-field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulesConfig {
    pub preset: String,
    pub noise: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_zeta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub varsigma_zeta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub varsigma_xi: Option<f64>,
}

impl Default for SchedulesConfig {
    fn default() -> Self {
        Self::preset("sec5-convergence")
    }
}

impl SchedulesConfig {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: name.to_string(),
            noise: true,
            lambda0: None,
            u: None,
            alpha0: None,
            v: None,
            gamma1: None,
            w1: None,
            gamma2: None,
            w2: None,
            sigma_zeta: None,
            varsigma_zeta: None,
            sigma_xi: None,
            varsigma_xi: None,
        }
    }

    pub fn resolve(&self) -> Result<ScheduleSet, HarnessError> {
        let base = ScheduleParams::preset(&self.preset)?;
        let p = ScheduleParams {
            lambda0: self.lambda0.unwrap_or(base.lambda0),
            u: self.u.unwrap_or(base.u),
            alpha0: self.alpha0.unwrap_or(base.alpha0),
            v: self.v.unwrap_or(base.v),
            gamma1: self.gamma1.unwrap_or(base.gamma1),
            w1: self.w1.unwrap_or(base.w1),
            gamma2: self.gamma2.unwrap_or(base.gamma2),
            w2: self.w2.unwrap_or(base.w2),
            sigma_zeta: self.sigma_zeta.unwrap_or(base.sigma_zeta),
            varsigma_zeta: self.varsigma_zeta.unwrap_or(base.varsigma_zeta),
            sigma_xi: self.sigma_xi.unwrap_or(base.sigma_xi),
            varsigma_xi: self.varsigma_xi.unwrap_or(base.varsigma_xi),
            noise: self.noise,
        };
        Ok(p.to_schedules()?)
    }
}

/// Which logged quantity an experiment tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorMetric {
    /// `|x_t - x*|^2`; needs the oracle.
    ErrX,
    /// `F(x_t) - F(x*)`; needs the oracle.
    GapF,
    /// Squared projected-gradient norm.
    GradNorm,
    /// `|gradient estimate - grad F(x_t)|^2`.
    GradEstErr,
}

impl ErrorMetric {
    pub fn needs_oracle(self) -> bool {
        matches!(self, ErrorMetric::ErrX | ErrorMetric::GapF)
    }

    pub fn of(self, r: &crate::engine::MetricsRecord) -> Option<f64> {
        match self {
            ErrorMetric::ErrX => r.err_x,
            ErrorMetric::GapF => r.gap_f,
            ErrorMetric::GradNorm => Some(r.grad_norm_sq),
            ErrorMetric::GradEstErr => Some(r.grad_est_err),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorMetric::ErrX => "|x_t - x*|^2",
            ErrorMetric::GapF => "F(x_t) - F*",
            ErrorMetric::GradNorm => "projected gradient norm^2",
            ErrorMetric::GradEstErr => "gradient estimate error^2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub metric: ErrorMetric,
    /// Fit window starts at `horizon / fit_window_divisor`.
    pub fit_window_divisor: u64,
    /// Fails the run when the fitted slope is above this value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            metric: ErrorMetric::ErrX,
            fit_window_divisor: 10,
            max_slope: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    pub baseline_lambda: f64,
    /// Preset whose noise profiles both algorithms receive.
    pub noise_preset: String,
    pub metric: ErrorMetric,
    /// The ratio compares the metric at the horizon with its value here.
    pub ratio_from: u64,
    pub threshold: f64,
    /// Share of seeds on which the baseline must be flagged.
    pub min_baseline_share: f64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            baseline_lambda: 0.01,
            noise_preset: "sec5-truthful".into(),
            metric: ErrorMetric::GapF,
            ratio_from: 10,
            threshold: 10.0,
            min_baseline_share: 0.8,
        }
    }
}

/// How an untruthful agent turns the run's outcome into its charging plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ChargingPolicy {
    /// Charge exactly what the algorithm scheduled.
    FollowSchedule,
    /// Charge at full rate, cheapest first, in slots whose predicted price
    /// is at most `ratio` times the mean prediction; remaining energy goes
    /// to the other slots in proportion to the schedule.
    PriceThreshold { ratio: f64 },
    /// After misreporting, charge at full rate, cheapest first, in slots
    /// whose predicted price fell below the prediction of the truthful run;
    /// the rest as in `price-threshold`. Truthful runs follow the schedule.
    BelowTruthful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthfulnessConfig {
    /// Model groups (0-based) whose members misreport together.
    pub groups: Vec<usize>,
    /// Share of pre-pivot demand reported after the pivot instead.
    pub shift_fraction: f64,
    /// First post-pivot slot.
    pub pivot_slot: usize,
    pub alg1_preset: String,
    pub naive_lambda: f64,
    pub policy: ChargingPolicy,
}

impl Default for TruthfulnessConfig {
    fn default() -> Self {
        Self {
            groups: vec![2, 5, 8],
            shift_fraction: 0.4,
            pivot_slot: 3,
            alg1_preset: "truthful-desk".into(),
            naive_lambda: 0.01,
            policy: ChargingPolicy::FollowSchedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub points: usize,
    /// Power-of-two steps keep `x + h` exact.
    pub step: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            points: 20,
            step: 2f64.powi(-17),
            seed: 0,
            tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrivacyConfig {
    /// Finite horizons to report; the infinite sum is always included.
    pub horizons: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_epsilon: Option<f64>,
    /// Overrides the mixing factor taken from the weight matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_hat: Option<f64>,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self {
            horizons: vec![10_000, 1_000_000],
            target_epsilon: Some(0.5),
            w_hat: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_stride")]
    pub stride: u64,
    /// Threads for independent seed jobs.
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Threads for per-agent updates inside one run.
    #[serde(default = "default_workers")]
    pub agent_workers: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub schedules: SchedulesConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub robustness: RobustnessConfig,
    #[serde(default)]
    pub truthfulness: TruthfulnessConfig,
    #[serde(default)]
    pub gradcheck: GradcheckConfig,
    #[serde(default)]
    pub privacy: PrivacyConfig,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_horizon() -> u64 {
    10_000
}
fn default_stride() -> u64 {
    100
}
fn default_workers() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`.
    pub fn template(kind: ExperimentKind) -> Self {
        let mut c = Self {
            kind,
            seeds: default_seeds(),
            horizon: default_horizon(),
            stride: default_stride(),
            workers: default_workers(),
            agent_workers: default_workers(),
            output_dir: PathBuf::from("out").join(kind.name()),
            problem: ProblemConfig::default(),
            topology: TopologyConfig::default(),
            schedules: SchedulesConfig::default(),
            convergence: ConvergenceConfig::default(),
            robustness: RobustnessConfig::default(),
            truthfulness: TruthfulnessConfig::default(),
            gradcheck: GradcheckConfig::default(),
            privacy: PrivacyConfig::default(),
        };
        match kind {
            ExperimentKind::Convergence => {
                c.problem.family = ProblemFamily::Synthetic;
                c.problem.agents = 10;
                c.topology.weight = 0.1;
                c.topology.band = SpectralBand::Strict;
                c.schedules = SchedulesConfig::preset("corollary1-sc");
            }
            ExperimentKind::Robustness => {
                c.horizon = 1000;
                c.stride = 10;
                c.topology.vary_with_seed = true;
            }
            ExperimentKind::Truthfulness => {
                c.horizon = 4000;
                c.stride = 4000;
            }
            ExperimentKind::PrivacyReport => {
                c.schedules = SchedulesConfig::preset("sec5-truthful");
            }
            ExperimentKind::Gradcheck | ExperimentKind::ValidateGraph => {}
        }
        c
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let c: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Canonical form: every field, defaults included, in a fixed order.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let presets = [
            &self.schedules.preset,
            &self.robustness.noise_preset,
            &self.truthfulness.alg1_preset,
        ];
        for p in presets {
            if !PRESET_NAMES.contains(&p.as_str()) {
                return Err(HarnessError::Config(format!(
                    "unknown preset `{p}` (known: {})",
                    PRESET_NAMES.join(", ")
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        if self.horizon == 0 || self.stride == 0 {
            return Err(HarnessError::Config("horizon and stride must be positive".into()));
        }
        if self.workers == 0 || self.agent_workers == 0 {
            return Err(HarnessError::Config("worker counts must be positive".into()));
        }
        if self.convergence.fit_window_divisor < 2 {
            return Err(HarnessError::Config("fit_window_divisor must be at least 2".into()));
        }
        let f = self.truthfulness.shift_fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(HarnessError::Config(format!("shift_fraction {f} outside [0, 1]")));
        }
        if self.problem.agents == 0 {
            return Err(HarnessError::Config("problem needs at least one agent".into()));
        }
        Ok(())
    }

    pub fn schedule_set(&self) -> Result<ScheduleSet, HarnessError> {
        self.schedules.resolve()
    }

    /// Paths of every input file the config references.
    pub fn input_files(&self) -> Vec<&Path> {
        [
            self.problem.models_csv.as_deref(),
            self.problem.demand_csv.as_deref(),
            self.topology.edge_list.as_deref(),
        ]
        .into_iter()
        .flatten()
        .collect()
    }

    pub fn build_problem(&self) -> Result<ProblemInstance, HarnessError> {
        let p = &self.problem;
        Ok(match p.family {
            ProblemFamily::Synthetic => ProblemInstance::Synthetic(SyntheticProblem::generate(
                &SyntheticSpec {
                    kind: p.synthetic_kind,
                    agents: p.agents,
                    dim_x: p.dim_x,
                    dim_agg: p.dim_agg,
                    seed: p.instance_seed,
                    half_width: p.half_width,
                    kappa: p.kappa,
                },
            )),
            ProblemFamily::Ev => {
                let spec = if p.models_csv.is_none() && p.demand_csv.is_none() {
                    EvChargingSpec::desk(p.agents)
                } else {
                    let models = match &p.models_csv {
                        Some(path) => EvModel::parse_csv(&read(path)?)?,
                        None => EvModel::bundled(),
                    };
                    let profile = match &p.demand_csv {
                        Some(path) => crate::problems::parse_demand_csv(&read(path)?)?,
                        None => crate::problems::DEMAND_PROFILE_GW.to_vec(),
                    };
                    EvChargingSpec::from_tables(&models, &profile, p.agents)
                };
                ProblemInstance::Ev(EvProblem::new(spec)?)
            }
        })
    }

    pub fn build_topology(&self, run_seed: u64) -> Result<Topology, HarnessError> {
        let t = &self.topology;
        let m = self.problem.agents;
        let seed = if t.vary_with_seed {
            t.seed.wrapping_add(run_seed)
        } else {
            t.seed
        };
        Ok(match t.kind {
            TopologyKind::KRegular => generate_k_regular(m, t.degree, seed)?,
            TopologyKind::Ring => Topology::ring(m),
            TopologyKind::Path => Topology::path(m),
            TopologyKind::Complete => Topology::complete(m),
            TopologyKind::EdgeList => {
                let path = t.edge_list.as_deref().ok_or_else(|| {
                    HarnessError::Config("topology kind edge-list needs `edge_list`".into())
                })?;
                Topology::load_edge_list(path)?
            }
        })
    }

    pub fn build_weights(&self, run_seed: u64) -> Result<WeightMatrix, HarnessError> {
        let topo = self.build_topology(run_seed)?;
        Ok(build_weight_matrix(&topo, self.topology.weight, self.topology.band)?)
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// A concrete problem selected by the config.
#[derive(Debug, Clone)]
pub enum ProblemInstance {
    Ev(EvProblem),
    Synthetic(SyntheticProblem),
}

impl ProblemInstance {
    pub fn as_dyn(&self) -> &dyn AggregativeProblem {
        match self {
            ProblemInstance::Ev(p) => p,
            ProblemInstance::Synthetic(p) => p,
        }
    }

    pub fn as_ev(&self) -> Option<&EvProblem> {
        match self {
            ProblemInstance::Ev(p) => Some(p),
            ProblemInstance::Synthetic(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_round_trip_through_toml() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::template(kind);
            let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c, "{kind}");
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::from_toml("kind = \"convergence\"\n").unwrap();
        assert_eq!(c.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.horizon, 10_000);
        assert_eq!(c.truthfulness.shift_fraction, 0.4);
    }

    #[test]
    fn unknown_keys_and_presets_are_rejected() {
        assert!(ExperimentConfig::from_toml("kind = \"convergence\"\nhorizn = 3\n").is_err());
        let bad = "kind = \"convergence\"\n[schedules]\npreset = \"nope\"\n";
        assert!(matches!(ExperimentConfig::from_toml(bad), Err(HarnessError::Config(_))));
    }

    #[test]
    fn overrides_replace_preset_fields() {
        let text = "kind = \"convergence\"\n[schedules]\npreset = \"corollary1-sc\"\nu = 0.9\nnoise = false\n";
        let s = ExperimentConfig::from_toml(text).unwrap().schedule_set().unwrap();
        assert_eq!(s.lambda.exponent, 0.9);
        assert_eq!(s.alpha.exponent, 0.95);
        assert!(!s.noise.enabled);
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = ExperimentConfig::template(ExperimentKind::Truthfulness);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.truthfulness.pivot_slot = 4;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.topology.weight = 0.19;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn policy_parses_from_inline_table() {
        let text = "kind = \"truthfulness\"\n[truthfulness]\npolicy = { kind = \"price-threshold\", ratio = 0.9 }\n";
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.truthfulness.policy, ChargingPolicy::PriceThreshold { ratio: 0.9 });
    }
}
