use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noma_das::alloc::Algorithm;
use noma_das::harness::{aggregate, run_audit, run_monte_carlo, write_aggregate, write_records, RunConfig, SweepAxis};
use noma_das::{oracle, Result, ScenarioConfig};

#[derive(Parser)]
#[command(version, about = "Power-minimizing NOMA resource allocation in distributed antenna systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment described by a TOML file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Per-trial CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional aggregate CSV.
        #[arg(long)]
        aggregate: Option<PathBuf>,
    },
    /// Sweep demand, user count or RRH count.
    Sweep {
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Base experiment; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        aggregate: Option<PathBuf>,
    },
    /// Check allocation invariants on random drops; exits nonzero on any violation.
    Audit {
        #[arg(long, default_value_t = 100)]
        drops: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "9e6")]
        rates: Vec<f64>,
    },
    /// Compare closed forms and optimizers with brute-force references.
    Oracle {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 50)]
        drops: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Dump one drop's channel gains as CSV.
    Channel {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(config: &RunConfig, out: Option<&PathBuf>, aggregate_out: Option<&PathBuf>) -> Result<()> {
    let records = run_monte_carlo(config)?;
    if let Some(path) = out {
        write_records(&records, File::create(path)?)?;
    }
    let report = aggregate(&records)?;
    if let Some(path) = aggregate_out {
        write_aggregate(&report.stats, File::create(path)?)?;
    }
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{:<15} {:>12} {:>14} {:>12} {:>7} {:>7} {:>7} {:>6}", "algorithm", config.axis.name(), "mean_W", "std_W", "nonmux", "mutsic", "singsic", "n")?;
    for s in &report.stats {
        writeln!(
            stdout,
            "{:<15} {:>12} {:>14.6e} {:>12.4e} {:>7.2} {:>7.2} {:>7.2} {:>6}",
            s.algorithm.name(),
            s.sweep_value,
            s.mean_power_w,
            s.std_power_w,
            s.mean_nonmux,
            s.mean_mutsic,
            s.mean_singsic,
            s.n_trials
        )?;
    }
    if report.excluded_failures > 0 {
        writeln!(stdout, "excluded failed trials: {}", report.excluded_failures)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config, out, aggregate } => {
            emit(&RunConfig::from_file(config)?, Some(&out), aggregate.as_ref())?;
        }
        Command::Sweep { axis, values, config, trials, seed, algorithms, out, aggregate } => {
            let mut cfg = match config {
                Some(p) => RunConfig::from_file(p)?,
                None => RunConfig::default(),
            };
            cfg.axis = axis;
            cfg.values = values;
            cfg.trials = trials.unwrap_or(cfg.trials);
            cfg.base_seed = seed.unwrap_or(cfg.base_seed);
            cfg.algorithms = algorithms.unwrap_or(cfg.algorithms);
            emit(&cfg, out.as_ref(), aggregate.as_ref())?;
        }
        Command::Audit { drops, seed, rates } => {
            let cfg = RunConfig { trials: drops, base_seed: seed, values: rates, ..RunConfig::default() };
            let report = run_audit(&cfg)?;
            for f in &report.findings {
                println!("seed {} {}: {}", f.seed, f.algorithm, f.violation);
            }
            println!("{} runs on {} drops, {} violations", report.runs, report.drops, report.findings.len());
            return Ok(report.passed());
        }
        Command::Oracle { instances, drops, seed } => {
            let checks = oracle::run_all(seed, instances, drops);
            for c in &checks {
                let verdict = if c.passed() { "PASS" } else { "FAIL" };
                println!("{verdict} {:<48} n={:<5} worst={:.3e} tol={:.0e}", c.name, c.instances, c.worst, c.tolerance);
            }
            return Ok(checks.iter().all(|c| c.passed()));
        }
        Command::Channel { seed, config, out } => {
            let cfg = match config {
                Some(p) => ScenarioConfig::from_file(p)?,
                None => ScenarioConfig::default(),
            };
            let (_, channel) = cfg.realize(seed)?;
            channel.write_csv(&out)?;
            println!("checksum {:016x}", channel.checksum());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
