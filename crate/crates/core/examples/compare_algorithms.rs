//! Runs every algorithm on the same drop and prints power and subcarrier use.
//!
//! ```bash
//! cargo run --release --example compare_algorithms -- 12e6 3
//! ```

use noma_das::alloc::{audit_allocation, run_algorithm, Algorithm, AlgorithmConfig};
use noma_das::ScenarioConfig;

fn main() -> noma_das::Result<()> {
    let mut args = std::env::args().skip(1);
    let rate = args.next().and_then(|s| s.parse().ok()).unwrap_or(9e6);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let (scenario, channel) = ScenarioConfig { rate_demand_bps: rate, ..ScenarioConfig::default() }.realize(seed)?;

    println!("{:<15} {:>12} {:>7} {:>7} {:>7} {:>6}", "algorithm", "power W", "nonmux", "mutsic", "singsic", "audit");
    for algorithm in Algorithm::ALL {
        let config = AlgorithmConfig::new(algorithm);
        let r = run_algorithm(&scenario, &channel, &config)?;
        let audit = audit_allocation(&r, &channel, &scenario.rate_demands_bps, &config);
        println!(
            "{:<15} {:>12.4e} {:>7} {:>7} {:>7} {:>6}",
            algorithm.name(),
            r.total_power_w,
            r.counts.non_multiplexed,
            r.counts.mutual_sic,
            r.counts.single_sic,
            if audit.is_empty() { "ok" } else { "FAIL" }
        );
    }
    Ok(())
}
