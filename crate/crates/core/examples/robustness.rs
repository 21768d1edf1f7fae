//! The tracker and the constant-step baseline on the EV instance, both fed
//! the same Laplace noise.

use truthful_agg::engine::{init_run, Algorithm, RunOptions};
use truthful_agg::network::{build_weight_matrix, generate_k_regular, SpectralBand};
use truthful_agg::problems::{centralized_oracle, EvChargingSpec, EvProblem, OracleOptions};
use truthful_agg::schedules::ScheduleSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = EvProblem::new(EvChargingSpec::desk(20))?;
    let oracle = centralized_oracle(&problem, &OracleOptions::default());
    let topology = generate_k_regular(20, 4, 1)?;
    let w = build_weight_matrix(&topology, 0.2, SpectralBand::Contractive)?;

    let noise = ScheduleSet::preset("sec5-truthful")?.noise;
    let mut schedules = ScheduleSet::preset("sec5-convergence")?;
    schedules.noise = noise;

    for (name, algorithm) in [
        ("tracker", Algorithm::Tracker),
        ("baseline", Algorithm::Baseline { lambda: 0.01 }),
    ] {
        let options = RunOptions { algorithm, ..RunOptions::default() };
        let mut run = init_run(&problem, &w, schedules.clone(), 1, options)?;
        let out = run.run(1_000, 10, Some(&oracle));
        let gap = |t| out.at(t).and_then(|r| r.gap_f);
        match (gap(10), out.last().and_then(|r| r.gap_f)) {
            (Some(a), Some(b)) => println!(
                "{name:>8}: F - F* at t=10 {a:.3e}, at t=1000 {b:.3e}, ratio {:.2}",
                b / a
            ),
            _ => println!("{name:>8}: diverged ({:?})", out.divergence),
        }
    }
    Ok(())
}
