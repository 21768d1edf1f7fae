//! Centralized solution of the EV instance: valley filling of the base
//! demand and the resulting prices.

use truthful_agg::problems::{aggregate, centralized_oracle, EvChargingSpec, EvProblem, OracleOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = EvProblem::new(EvChargingSpec::desk(20))?;
    let sol = centralized_oracle(&problem, &OracleOptions::default());
    println!("converged: {}, social cost {:.6}", sol.converged, sol.value);

    let spec = problem.spec();
    let m = spec.agents() as f64;
    let phi = aggregate(&problem, &sol.x);
    let prices = problem.prices(&phi);
    println!("slot  base demand  charging   price");
    for k in 0..spec.slots() {
        let base: f64 = spec.demand.iter().map(|d| d[k]).sum::<f64>() / m;
        let charge: f64 = sol.x.iter().map(|x| x[k]).sum::<f64>() / m;
        println!("{k:>4}  {base:>11.4}  {charge:>8.4}  {:.4}", prices[k]);
    }
    Ok(())
}
