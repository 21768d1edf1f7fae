//! Paired runs of the tracker and the constant-step baseline under the
//! same noise draws.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::{init_run, Algorithm, MetricsRecord, RunOptions, RunOutput};
use crate::problems::{centralized_oracle, OracleOptions};
use crate::schedules::ScheduleSet;

use super::output::{mean_records, metrics_csv, write_file, write_manifest};
use super::svg::{LinePlot, Series};
use super::{run_seeds, ErrorMetric, ExperimentConfig, HarnessError, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveVerdict {
    pub seed: u64,
    pub algorithm: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<String>,
    /// Metric at the horizon over the metric at `ratio_from`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_metric: Option<f64>,
    pub flagged: bool,
}

impl CurveVerdict {
    fn of(
        seed: u64,
        algorithm: &'static str,
        out: &RunOutput,
        metric: ErrorMetric,
        from: u64,
        threshold: f64,
    ) -> Self {
        let start = out.at(from).and_then(|r| metric.of(r));
        let end = if out.divergence.is_none() {
            out.last().and_then(|r| metric.of(r))
        } else {
            None
        };
        let ratio = match (start, end) {
            (Some(a), Some(b)) if a > 0.0 => Some(b / a),
            _ => None,
        };
        Self {
            seed,
            algorithm,
            divergence: out.divergence.map(|d| d.to_string()),
            ratio,
            final_metric: end,
            flagged: out.divergence.is_some() || ratio.is_some_and(|r| r > threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessSummary {
    pub metric: ErrorMetric,
    pub threshold: f64,
    pub verdicts: Vec<CurveVerdict>,
    pub baseline_flagged: usize,
    pub algorithm1_flagged: usize,
    pub seeds: usize,
    pub min_baseline_share: f64,
    #[serde(skip)]
    pub mean_algorithm1: Vec<MetricsRecord>,
    #[serde(skip)]
    pub mean_baseline: Vec<MetricsRecord>,
}

impl RobustnessSummary {
    /// The baseline flagged on enough seeds and the tracker on none.
    pub fn replicated(&self) -> bool {
        self.algorithm1_flagged == 0
            && self.baseline_flagged as f64 >= self.min_baseline_share * self.seeds as f64
    }

    pub fn outcome(&self) -> Outcome {
        if self.replicated() {
            Outcome::ExpectedDivergence
        } else {
            Outcome::AssertionFailed(vec![format!(
                "baseline flagged on {}/{} seeds (need share {}), Algorithm 1 on {}",
                self.baseline_flagged, self.seeds, self.min_baseline_share, self.algorithm1_flagged
            )])
        }
    }
}

fn verdicts_csv(verdicts: &[CurveVerdict]) -> String {
    let mut s = String::from("seed,algorithm,diverged,ratio,final_metric,flagged\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for v in verdicts {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            v.seed,
            v.algorithm,
            v.divergence.is_some(),
            opt(v.ratio),
            opt(v.final_metric),
            v.flagged
        );
    }
    s
}

/// Runs both algorithms on every seed with the noise profiles of
/// `robustness.noise_preset` and emits per-curve verdicts and an overlay.
pub fn run_robustness_experiment(
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<RobustnessSummary, HarnessError> {
    let rc = &config.robustness;
    let instance = config.build_problem()?;
    let problem = instance.as_dyn();
    let mut schedules = config.schedule_set()?;
    let noise_source = ScheduleSet::preset(&rc.noise_preset)?;
    schedules.noise.zeta = noise_source.noise.zeta;
    schedules.noise.xi = noise_source.noise.xi;
    let oracle = rc
        .metric
        .needs_oracle()
        .then(|| centralized_oracle(problem, &OracleOptions::default()));
    let algorithms = [
        ("algorithm1", Algorithm::Tracker),
        ("baseline", Algorithm::Baseline { lambda: rc.baseline_lambda }),
    ];

    let results = run_seeds(&config.seeds, config.workers, |seed| {
        let w = config.build_weights(seed)?;
        algorithms
            .iter()
            .map(|&(_, algorithm)| {
                let options = RunOptions {
                    algorithm,
                    workers: config.agent_workers,
                    ..RunOptions::default()
                };
                let mut state = init_run(problem, &w, schedules.clone(), seed, options)?;
                Ok(state.run(config.horizon, config.stride, oracle.as_ref()))
            })
            .collect::<Result<Vec<RunOutput>, HarnessError>>()
    })?;

    let mut artifacts = Vec::new();
    let mut verdicts = Vec::new();
    let mut curves: [Vec<RunOutput>; 2] = [Vec::new(), Vec::new()];
    for (&seed, result) in config.seeds.iter().zip(results) {
        for (k, out) in result?.into_iter().enumerate() {
            let name = algorithms[k].0;
            let rel = PathBuf::from(format!("seeds/{name}-seed-{seed}.csv"));
            write_file(&dir.join(&rel), metrics_csv(&out.records, out.divergence.as_ref()))?;
            artifacts.push(rel);
            verdicts.push(CurveVerdict::of(seed, name, &out, rc.metric, rc.ratio_from, rc.threshold));
            curves[k].push(out);
        }
    }
    write_file(&dir.join("verdicts.csv"), verdicts_csv(&verdicts))?;
    artifacts.push("verdicts.csv".into());

    let mean = |runs: &[RunOutput]| {
        let slices: Vec<&[MetricsRecord]> = runs.iter().map(|o| o.records.as_slice()).collect();
        mean_records(&slices)
    };
    let count = |name: &str| verdicts.iter().filter(|v| v.algorithm == name && v.flagged).count();
    let summary = RobustnessSummary {
        metric: rc.metric,
        threshold: rc.threshold,
        baseline_flagged: count("baseline"),
        algorithm1_flagged: count("algorithm1"),
        seeds: config.seeds.len(),
        min_baseline_share: rc.min_baseline_share,
        mean_algorithm1: mean(&curves[0]),
        mean_baseline: mean(&curves[1]),
        verdicts,
    };

    let points = |recs: &[MetricsRecord]| -> Vec<(f64, f64)> {
        recs.iter()
            .filter_map(|r| rc.metric.of(r).map(|v| (r.t as f64, v)))
            .collect()
    };
    let plot = LinePlot {
        title: format!("noise from {}: seed mean {}", rc.noise_preset, rc.metric.label()),
        x_label: "iteration t".into(),
        y_label: rc.metric.label().into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series::new("Algorithm 1", points(&summary.mean_algorithm1)),
            Series::new(
                format!("baseline, step {}", rc.baseline_lambda),
                points(&summary.mean_baseline),
            ),
        ],
    };
    write_file(&dir.join("overlay.svg"), plot.render())?;
    artifacts.push("overlay.svg".into());
    write_file(
        &dir.join("summary.toml"),
        toml::to_string(&summary).expect("summary serializes"),
    )?;
    artifacts.push("summary.toml".into());
    write_manifest(config, dir, &artifacts, vec![])?;
    Ok(summary)
}
