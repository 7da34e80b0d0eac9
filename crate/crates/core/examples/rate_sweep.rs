//! Small Monte Carlo sweep over the rate demand, written as CSV to stdout
//! with a summary on stderr.
//!
//! ```bash
//! cargo run --release --example rate_sweep > trials.csv
//! ```

use noma_das::alloc::Algorithm;
use noma_das::harness::{aggregate, run_monte_carlo, write_records, RunConfig};

fn main() -> noma_das::Result<()> {
    let config = RunConfig {
        algorithms: vec![Algorithm::OmaCas, Algorithm::OmaDas, Algorithm::SrrhLpo, Algorithm::MutAndSingSic],
        trials: 20,
        values: vec![5e6, 9e6, 12e6],
        ..RunConfig::default()
    };
    let records = run_monte_carlo(&config)?;
    write_records(&records, std::io::stdout().lock())?;

    let report = aggregate(&records)?;
    for s in &report.stats {
        eprintln!("{:<15} {:>5.0} Mbps  {:.4e} W", s.algorithm.name(), s.sweep_value / 1e6, s.mean_power_w);
    }
    Ok(())
}
