//! Two EVs with the same model. The first under-reports its demand before
//! midnight, which pushes the second one's charging into those slots
//! under the noise-free baseline.

use truthful_agg::engine::{init_run, Algorithm, RunOptions};
use truthful_agg::harness::misreported_demand;
use truthful_agg::network::{build_weight_matrix, SpectralBand, Topology};
use truthful_agg::problems::{EvChargingSpec, EvProblem};
use truthful_agg::schedules::ScheduleSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let desk = EvChargingSpec::desk(20);
    let spec = EvChargingSpec::new(
        vec![desk.x_max[0].clone(); 2],
        vec![desk.energy[0]; 2],
        vec![desk.demand[0].clone(); 2],
        desk.c_tot / 10.0,
    );
    let truth = EvProblem::new(spec)?;
    // Slots start at 21:00, so midnight is slot 3.
    let pivot = 3;
    let lie = misreported_demand(&truth.spec().demand[0], pivot, 0.4)?;
    let reported = truth.with_demand(0, lie)?;

    let w = build_weight_matrix(&Topology::path(2), 0.4, SpectralBand::Strict)?;
    let schedules = ScheduleSet::preset("sec5-convergence")?.without_noise();
    let options = RunOptions {
        algorithm: Algorithm::Baseline { lambda: 0.01 },
        ..RunOptions::default()
    };
    let mut before_midnight = Vec::new();
    for p in [&truth, &reported] {
        let mut run = init_run(p, &w, schedules.clone(), 0, options)?;
        let out = run.run(4_000, 4_000, None);
        before_midnight.push(out.final_x[1][..pivot].iter().sum::<f64>());
    }
    println!(
        "EV 2 charging before midnight: {:.4} when both report truthfully, {:.4} when EV 1 misreports",
        before_midnight[0], before_midnight[1]
    );
    Ok(())
}
