//! Keeps the subcarrier assignment of the same-RRH heuristic and re-solves
//! the powers jointly.

use noma_das::alloc::{optimal_power_allocation, run_algorithm, Algorithm, AlgorithmConfig};
use noma_das::ScenarioConfig;

fn main() -> noma_das::Result<()> {
    let (scenario, channel) = ScenarioConfig { rate_demand_bps: 12e6, ..ScenarioConfig::default() }.realize(3)?;
    let lpo = run_algorithm(&scenario, &channel, &AlgorithmConfig::new(Algorithm::SrrhLpo))?;
    let out = optimal_power_allocation(&lpo.uses, &channel, &scenario.rate_demands_bps)?;
    println!("heuristic powers  {:.5e} W", out.input_total_w);
    println!("joint optimum     {:.5e} W", out.total_power_w);
    println!("saving            {:.2} %", 100.0 * (1.0 - out.total_power_w / out.input_total_w));
    println!("KKT residual      {:.2e} (converged: {}, fallback: {})", out.kkt_residual, out.converged, out.fallback);
    Ok(())
}
