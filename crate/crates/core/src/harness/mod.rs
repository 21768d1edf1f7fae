//! Experiment orchestration: configs, the three experiment families,
//! reports and artifact emission.

mod config;
mod convergence;
mod output;
mod reports;
mod robustness;
pub mod svg;
mod truthfulness;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{
    ChargingPolicy, ConvergenceConfig, ErrorMetric, ExperimentConfig, ExperimentKind,
    GradcheckConfig, PrivacyConfig, ProblemConfig, ProblemFamily, ProblemInstance,
    RobustnessConfig, SchedulesConfig, TopologyConfig, TopologyKind, TruthfulnessConfig,
};
pub use convergence::{run_convergence_experiment, ConvergenceSummary, SeedFailure};
pub use output::{mean_records, write_manifest, Manifest, MANIFEST_FILE};
pub use reports::{
    check_gradients, check_lemma2_bounds, gradcheck_report, lemma2_digest, privacy_report,
    validate_graph, GradcheckSummary,
    GraphReport, PrivacyExperimentReport,
};
pub use robustness::{run_robustness_experiment, CurveVerdict, RobustnessSummary};
pub use truthfulness::{
    misreported_demand, run_truthfulness_experiment, AdjacentScenario, GainRow,
    TruthfulnessSummary,
};

use crate::engine::EngineError;
use crate::network::NetworkError;
use crate::privacy::PrivacyError;
use crate::problems::ProblemError;
use crate::schedules::ScheduleError;

/// Overrides `output_dir` of every config when set.
pub const OUTPUT_ENV: &str = "TRUTHFUL_AGG_OUT";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error("{0} needs an EV problem")]
    NeedsEv(&'static str),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("every seed failed")]
    AllSeedsFailed,
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// How a finished experiment should be reported to the shell.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Success,
    /// A checked property failed; the messages say which.
    AssertionFailed(Vec<String>),
    /// A run diverged where divergence is the expected behaviour.
    ExpectedDivergence,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::AssertionFailed(_) => 2,
            Outcome::ExpectedDivergence => 3,
        }
    }
}

/// `output_dir` of `config`, unless [`OUTPUT_ENV`] is set.
pub fn resolve_output_dir(config: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output_dir.clone(),
    }
}

/// Runs seed jobs on a pool of `workers` threads and returns results in
/// seed order.
pub(crate) fn run_seeds<T: Send>(
    seeds: &[u64],
    workers: usize,
    job: impl Fn(u64) -> T + Sync,
) -> Result<Vec<T>, HarnessError> {
    use rayon::prelude::*;
    if workers <= 1 {
        return Ok(seeds.iter().map(|&s| job(s)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))?;
    Ok(pool.install(|| seeds.par_iter().map(|&s| job(s)).collect()))
}

/// Runs the experiment named by `config.kind`, writing artifacts to `dir`.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path) -> Result<Outcome, HarnessError> {
    match config.kind {
        ExperimentKind::Convergence => Ok(run_convergence_experiment(config, dir)?.outcome()),
        ExperimentKind::Robustness => Ok(run_robustness_experiment(config, dir)?.outcome()),
        ExperimentKind::Truthfulness => Ok(run_truthfulness_experiment(config, dir)?.outcome()),
        ExperimentKind::PrivacyReport => Ok(privacy_report(config, Some(dir))?.outcome()),
        ExperimentKind::Gradcheck => Ok(gradcheck_report(config, Some(dir))?.outcome()),
        ExperimentKind::ValidateGraph => {
            let w = config.build_topology(config.topology.seed)?;
            Ok(validate_graph(&w, config.topology.weight, config.topology.band).outcome())
        }
    }
}
