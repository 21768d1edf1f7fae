//! Strongly convex synthetic problem: distance to the centralized optimum
//! with and without the privacy noise.

use truthful_agg::engine::{init_run, RunOptions};
use truthful_agg::network::{build_weight_matrix, generate_k_regular, SpectralBand};
use truthful_agg::numeric::loglog_slope;
use truthful_agg::problems::{centralized_oracle, OracleOptions, SyntheticProblem, SyntheticSpec};
use truthful_agg::schedules::ScheduleSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = SyntheticProblem::generate(&SyntheticSpec::default());
    let topology = generate_k_regular(10, 4, 0)?;
    let w = build_weight_matrix(&topology, 0.1, SpectralBand::Strict)?;
    let oracle = centralized_oracle(&problem, &OracleOptions::default());
    println!("oracle: F* = {:.6} after {} iterations", oracle.value, oracle.iterations);

    let horizon = 20_000;
    for noisy in [false, true] {
        let mut schedules = ScheduleSet::preset("corollary1-sc")?;
        if !noisy {
            schedules = schedules.without_noise();
        }
        let mut run = init_run(&problem, &w, schedules, 7, RunOptions::default())?;
        let out = run.run(horizon, 2_000, Some(&oracle));
        println!("\n{}", if noisy { "with noise" } else { "noise-free" });
        for r in &out.records {
            println!("  t = {:>6}  |x - x*|^2 = {:.3e}", r.t, r.err_x.unwrap_or(f64::NAN));
        }
        let tail: Vec<(f64, f64)> = out
            .records
            .iter()
            .filter(|r| r.t >= horizon / 10)
            .filter_map(|r| r.err_x.map(|e| (r.t as f64, e)))
            .collect();
        if let Some(slope) = loglog_slope(&tail) {
            println!("  log-log slope over the last decade: {slope:.2}");
        }
    }
    Ok(())
}
