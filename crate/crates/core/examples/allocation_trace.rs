//! Step-by-step trace of one greedy run: which user took which subcarrier
//! in which phase, and how much power it saved.

use noma_das::alloc::{run_algorithm, Algorithm, AlgorithmConfig, SubcarrierUse};
use noma_das::ScenarioConfig;

fn main() -> noma_das::Result<()> {
    let algorithm: Algorithm = std::env::args().nth(1).as_deref().unwrap_or("MutAndSingSIC").parse()?;
    let config = ScenarioConfig { num_users: 6, num_subcarriers: 16, rate_demand_bps: 4e6, ..ScenarioConfig::default() };
    let (scenario, channel) = config.realize(7)?;
    let r = run_algorithm(&scenario, &channel, &AlgorithmConfig::new(algorithm))?;

    for s in &r.trace.steps {
        println!(
            "{:<12} user {:>2} sc {:>2}  {:>11.3e} -> {:>11.3e} W",
            format!("{:?}", s.phase),
            s.user,
            s.subcarrier,
            s.total_before_w,
            s.total_after_w
        );
    }
    for run in &r.trace.runs {
        println!("{:?}: {} iterations (bound {})", run.phase, run.iterations, run.bound);
    }
    println!();
    for (n, u) in r.uses.iter().enumerate() {
        match u {
            SubcarrierUse::Unused => println!("sc {n:>2}: unused"),
            SubcarrierUse::Sole { user, rrh, power_w } => println!("sc {n:>2}: user {user} via rrh {rrh}, {power_w:.3e} W"),
            SubcarrierUse::SingleSic { k1, k2, rrh, p1_w, p2_w } => {
                println!("sc {n:>2}: users {k1}+{k2} via rrh {rrh}, {p1_w:.3e} + {p2_w:.3e} W")
            }
            SubcarrierUse::MutualSic { k1, r1, k2, r2, p1_w, p2_w } => {
                println!("sc {n:>2}: user {k1} via rrh {r1} and user {k2} via rrh {r2}, {p1_w:.3e} + {p2_w:.3e} W")
            }
        }
    }
    println!("total {:.4e} W", r.total_power_w);
    Ok(())
}
