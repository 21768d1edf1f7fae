//! Central-difference gradient check on every bundled problem.

use truthful_agg::harness::check_gradients;
use truthful_agg::problems::{
    AggregativeProblem, EvChargingSpec, EvProblem, SyntheticKind, SyntheticProblem, SyntheticSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut problems: Vec<(String, Box<dyn AggregativeProblem>)> =
        vec![("ev".into(), Box::new(EvProblem::new(EvChargingSpec::desk(20))?))];
    for kind in [SyntheticKind::StronglyConvex, SyntheticKind::Convex, SyntheticKind::Nonconvex] {
        let spec = SyntheticSpec { kind, ..SyntheticSpec::default() };
        problems.push((format!("{kind:?}"), Box::new(SyntheticProblem::generate(&spec))));
    }
    for (name, p) in &problems {
        let s = check_gradients(p.as_ref(), 20, 2f64.powi(-17), 0, 1e-5)?;
        println!("{name}:\n{s}");
    }
    Ok(())
}
