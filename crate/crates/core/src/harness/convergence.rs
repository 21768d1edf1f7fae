//! Seed-averaged convergence runs with a log-log rate fit.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::engine::{init_run, MetricsRecord, RunOptions, RunOutput};
use crate::numeric::loglog_slope;
use crate::problems::{centralized_oracle, OracleOptions};

use super::output::{mean_records, metrics_csv, write_file, write_manifest};
use super::svg::{LinePlot, Series};
use super::{run_seeds, ErrorMetric, ExperimentConfig, HarnessError, Outcome};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub metric: ErrorMetric,
    pub horizon: u64,
    /// First iteration of the slope fit window.
    pub fit_from: u64,
    /// Least-squares slope of the seed-mean metric in log-log scale.
    pub slope: Option<f64>,
    pub seeds: Vec<u64>,
    /// Final metric per successful seed, in seed order.
    pub final_metric: Vec<f64>,
    pub mean_final: Option<f64>,
    pub weighted_avg_gap: Option<f64>,
    pub weighted_avg_grad: Option<f64>,
    pub failures: Vec<SeedFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
    #[serde(skip)]
    pub mean: Vec<MetricsRecord>,
}

impl ConvergenceSummary {
    pub fn outcome(&self) -> Outcome {
        let mut msgs: Vec<String> = self
            .failures
            .iter()
            .map(|f| format!("seed {}: {}", f.seed, f.error))
            .collect();
        if let Some(limit) = self.max_slope {
            match self.slope {
                Some(s) if s <= limit => {}
                Some(s) => msgs.push(format!("slope {s:.4} above {limit}")),
                None => msgs.push("no slope could be fitted".into()),
            }
        }
        if msgs.is_empty() {
            Outcome::Success
        } else {
            Outcome::AssertionFailed(msgs)
        }
    }

    /// Metric of the seed mean at iteration `t`, if logged.
    pub fn mean_at(&self, t: u64) -> Option<f64> {
        self.mean
            .iter()
            .find(|r| r.t == t)
            .and_then(|r| self.metric.of(r))
    }
}

/// Runs every seed, writes per-seed and seed-mean metrics, the curve and a
/// manifest into `dir`. Failed seeds are reported and skipped.
pub fn run_convergence_experiment(
    config: &ExperimentConfig,
    dir: &Path,
) -> Result<ConvergenceSummary, HarnessError> {
    let instance = config.build_problem()?;
    let problem = instance.as_dyn();
    let schedules = config.schedule_set()?;
    let metric = config.convergence.metric;
    let oracle = metric
        .needs_oracle()
        .then(|| centralized_oracle(problem, &OracleOptions::default()));
    let options = RunOptions {
        workers: config.agent_workers,
        ..RunOptions::default()
    };

    let results = run_seeds(&config.seeds, config.workers, |seed| -> Result<RunOutput, HarnessError> {
        let w = config.build_weights(seed)?;
        let mut state = init_run(problem, &w, schedules.clone(), seed, options)?;
        Ok(state.run(config.horizon, config.stride, oracle.as_ref()))
    })?;

    let mut artifacts = Vec::new();
    let mut failures = Vec::new();
    let mut good: Vec<(u64, RunOutput)> = Vec::new();
    for (&seed, result) in config.seeds.iter().zip(results) {
        match result {
            Ok(out) => {
                let rel = PathBuf::from(format!("seeds/seed-{seed}.csv"));
                write_file(&dir.join(&rel), metrics_csv(&out.records, out.divergence.as_ref()))?;
                artifacts.push(rel);
                match out.divergence {
                    Some(d) => failures.push(SeedFailure {
                        seed,
                        error: d.to_string(),
                    }),
                    None => good.push((seed, out)),
                }
            }
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    if good.is_empty() {
        return Err(HarnessError::AllSeedsFailed);
    }

    let runs: Vec<&[MetricsRecord]> = good.iter().map(|(_, o)| o.records.as_slice()).collect();
    let mean = mean_records(&runs);
    write_file(&dir.join("metrics.csv"), metrics_csv(&mean, None))?;
    artifacts.push("metrics.csv".into());

    let fit_from = config.horizon / config.convergence.fit_window_divisor;
    let window: Vec<(f64, f64)> = mean
        .iter()
        .filter(|r| r.t >= fit_from.max(1))
        .filter_map(|r| metric.of(r).map(|v| (r.t as f64, v)))
        .collect();
    let slope = loglog_slope(&window);

    let final_metric: Vec<f64> = good
        .iter()
        .filter_map(|(_, o)| o.last().and_then(|r| metric.of(r)))
        .collect();
    let last = mean.last();
    let summary = ConvergenceSummary {
        metric,
        horizon: config.horizon,
        fit_from,
        slope,
        seeds: good.iter().map(|(s, _)| *s).collect(),
        mean_final: last.and_then(|r| metric.of(r)),
        final_metric,
        weighted_avg_gap: last.and_then(|r| r.weighted_avg_gap),
        weighted_avg_grad: last.map(|r| r.weighted_avg_grad),
        failures,
        max_slope: config.convergence.max_slope,
        mean,
    };

    let curve = LinePlot {
        title: format!(
            "{} ({}), slope {}",
            config.schedules.preset,
            metric.label(),
            slope.map_or("n/a".into(), |s| format!("{s:.3}"))
        ),
        x_label: "iteration t".into(),
        y_label: format!("seed mean {}", metric.label()),
        log_x: true,
        log_y: true,
        series: vec![Series::new(
            "Algorithm 1",
            summary
                .mean
                .iter()
                .filter_map(|r| metric.of(r).map(|v| (r.t as f64, v)))
                .collect(),
        )],
    };
    write_file(&dir.join("curve.svg"), curve.render())?;
    artifacts.push("curve.svg".into());
    write_file(
        &dir.join("summary.toml"),
        toml::to_string(&summary).expect("summary serializes"),
    )?;
    artifacts.push("summary.toml".into());
    write_manifest(
        config,
        dir,
        &artifacts,
        vec![format!("slope fitted by least squares on t in [{fit_from}, {}]", config.horizon)],
    )?;
    Ok(summary)
}
