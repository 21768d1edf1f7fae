//! Regime checks, the cumulative budget at several horizons, the
//! truthfulness bound and noise calibration.

use truthful_agg::network::{build_weight_matrix, generate_k_regular, SpectralBand};
use truthful_agg::privacy::{calibrate_noise, check_regime, epsilon, eta, Horizon, Regime};
use truthful_agg::problems::{AggregativeProblem, EvChargingSpec, EvProblem};
use truthful_agg::schedules::ScheduleSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let w = build_weight_matrix(&generate_k_regular(20, 4, 0)?, 0.2, SpectralBand::Contractive)?;
    let w_hat = w.w_hat();

    for preset in ["sec5-truthful", "truthful-desk"] {
        let s = ScheduleSet::preset(preset)?;
        let regime = check_regime(&s, Regime::Truthful);
        println!("{preset}: truthful regime {}", if regime.passes() { "holds" } else { "fails" });
        match epsilon(Horizon::Finite(10_000), &s, w_hat, false) {
            Ok(r) => println!("  eps(1e4) = {:.4}", r.epsilon),
            Err(e) => println!("  no budget: {e}"),
        }
    }

    let s = ScheduleSet::preset("truthful-desk")?;
    for h in [Horizon::Finite(100), Horizon::Finite(10_000), Horizon::Infinite] {
        let r = epsilon(h, &s, w_hat, false)?;
        println!("eps({h:?}) = {:.4} over {} terms", r.epsilon, r.terms);
    }

    let problem = EvProblem::new(EvChargingSpec::desk(20))?;
    let e = epsilon(Horizon::Finite(4_000), &s, w_hat, false)?.epsilon;
    let bound = eta(e, &problem.constants());
    println!("eta at eps {e:.3}: {:.4e} (intrinsic {:.4e})", bound.eta, bound.intrinsic);

    let cal = calibrate_noise(1.0, Horizon::Finite(10_000), &s, w_hat)?;
    println!(
        "noise bases for eps = 1 over 1e4 rounds: sigma_xi = {:.4}, sigma_zeta = {:.4} (achieved {:.12})",
        cal.sigma_xi, cal.sigma_zeta, cal.achieved
    );
    Ok(())
}
