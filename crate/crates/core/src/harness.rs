//! Monte Carlo driver: paired trials, aggregation and CSV output.
//!
//! Trial `t` at every sweep point draws its cell from seed `base_seed ^ t`,
//! and every algorithm runs on that same channel.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alloc::{audit_allocation, run_algorithm, Algorithm, AlgorithmConfig, Violation};
use crate::error::{invalid, Result};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Rate,
    Users,
    Rrhs,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Rate => "rate",
            SweepAxis::Users => "users",
            SweepAxis::Rrhs => "rrhs",
        }
    }

    /// Scenario at one sweep point.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(invalid(format!("{} sweep needs positive integers, got {value}", self.name())))
            }
        };
        let mut cfg = base.clone();
        match self {
            SweepAxis::Rate => cfg.rate_demand_bps = value,
            SweepAxis::Users => cfg.num_users = count()?,
            SweepAxis::Rrhs => cfg.num_rrhs = count()?,
        }
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rate" => Ok(SweepAxis::Rate),
            "users" => Ok(SweepAxis::Users),
            "rrhs" => Ok(SweepAxis::Rrhs),
            _ => Err(invalid(format!("unknown sweep axis {s:?}"))),
        }
    }
}

/// Thresholds shared by every algorithm in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmParams {
    pub rho_w: f64,
    pub mu: f64,
    pub alpha: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        let d = AlgorithmConfig::default();
        Self { rho_w: d.rho_w, mu: d.mu, alpha: d.alpha }
    }
}

impl AlgorithmParams {
    pub fn config(&self, algorithm: Algorithm) -> AlgorithmConfig {
        AlgorithmConfig { algorithm, rho_w: self.rho_w, mu: self.mu, alpha: self.alpha }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub base_seed: u64,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub params: AlgorithmParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = ScenarioConfig::default();
        Self {
            values: vec![scenario.rate_demand_bps],
            base_seed: scenario.seed,
            scenario,
            algorithms: Algorithm::ALL.to_vec(),
            trials: 200,
            axis: SweepAxis::Rate,
            params: AlgorithmParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("at least one trial is required"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("no algorithms selected"));
        }
        if self.values.is_empty() || self.values.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("sweep values must be positive"));
        }
        for v in &self.values {
            self.axis.apply(&self.scenario, *v)?.validate()?;
        }
        self.params.config(Algorithm::SrrhLpo).validate()
    }
}

/// One algorithm on one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_axis: SweepAxis,
    pub sweep_value: f64,
    pub algorithm: Algorithm,
    pub trial: usize,
    pub total_power_w: f64,
    pub nonmux_sc: usize,
    pub mutsic_sc: usize,
    pub singsic_sc: usize,
    pub failed_flag: bool,
    #[serde(skip)]
    pub channel_checksum: u64,
}

/// Seed of trial `t`.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    base_seed ^ trial as u64
}

/// Runs every (sweep point, trial) job in parallel; records come back in
/// (sweep, trial, algorithm) order.
pub fn run_monte_carlo(config: &RunConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let jobs: Vec<(f64, usize)> = config
        .values
        .iter()
        .flat_map(|v| (0..config.trials).map(move |t| (*v, t)))
        .collect();
    let per_job: Vec<Vec<TrialRecord>> = jobs
        .par_iter()
        .map(|&(value, trial)| run_trial(config, value, trial))
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

fn run_trial(config: &RunConfig, value: f64, trial: usize) -> Result<Vec<TrialRecord>> {
    let scenario_cfg = config.axis.apply(&config.scenario, value)?;
    let (scenario, channel) = scenario_cfg.realize(trial_seed(config.base_seed, trial))?;
    let checksum = channel.checksum();
    Ok(config
        .algorithms
        .iter()
        .map(|&algorithm| {
            let base = TrialRecord {
                sweep_axis: config.axis,
                sweep_value: value,
                algorithm,
                trial,
                total_power_w: f64::NAN,
                nonmux_sc: 0,
                mutsic_sc: 0,
                singsic_sc: 0,
                failed_flag: true,
                channel_checksum: checksum,
            };
            match run_algorithm(&scenario, &channel, &config.params.config(algorithm)) {
                Ok(r) => TrialRecord {
                    total_power_w: r.total_power_w,
                    nonmux_sc: r.counts.non_multiplexed,
                    mutsic_sc: r.counts.mutual_sic,
                    singsic_sc: r.counts.single_sic,
                    failed_flag: r.failed,
                    ..base
                },
                Err(_) => base,
            }
        })
        .collect())
}

/// Statistics of one (algorithm, sweep point) cell over successful trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub algorithm: Algorithm,
    pub sweep_value: f64,
    pub mean_power_w: f64,
    pub std_power_w: f64,
    pub mean_nonmux: f64,
    pub mean_mutsic: f64,
    pub mean_singsic: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub stats: Vec<AggregateStats>,
    /// Failed records left out of the statistics.
    pub excluded_failures: usize,
}

impl AggregateReport {
    pub fn get(&self, algorithm: Algorithm, sweep_value: f64) -> Option<&AggregateStats> {
        self.stats.iter().find(|s| s.algorithm == algorithm && s.sweep_value == sweep_value)
    }
}

/// Means and sample standard deviations per (algorithm, sweep point), in
/// algorithm order then first-seen sweep order.
pub fn aggregate(records: &[TrialRecord]) -> Result<AggregateReport> {
    if records.is_empty() {
        return Err(invalid("no records to aggregate"));
    }
    let mut values: Vec<f64> = Vec::new();
    for r in records {
        if !values.contains(&r.sweep_value) {
            values.push(r.sweep_value);
        }
    }
    let mut algorithms: Vec<Algorithm> = records.iter().map(|r| r.algorithm).collect();
    algorithms.sort();
    algorithms.dedup();

    let mut stats = Vec::new();
    let mut excluded_failures = 0;
    for &algorithm in &algorithms {
        for &value in &values {
            let cell: Vec<&TrialRecord> =
                records.iter().filter(|r| r.algorithm == algorithm && r.sweep_value == value).collect();
            let ok: Vec<&&TrialRecord> = cell.iter().filter(|r| !r.failed_flag).collect();
            excluded_failures += cell.len() - ok.len();
            if ok.is_empty() {
                continue;
            }
            let n = ok.len() as f64;
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
            let mean_power_w = mean(&|r| r.total_power_w);
            let std_power_w = if ok.len() > 1 {
                (ok.iter().map(|r| (r.total_power_w - mean_power_w).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            stats.push(AggregateStats {
                algorithm,
                sweep_value: value,
                mean_power_w,
                std_power_w,
                mean_nonmux: mean(&|r| r.nonmux_sc as f64),
                mean_mutsic: mean(&|r| r.mutsic_sc as f64),
                mean_singsic: mean(&|r| r.singsic_sc as f64),
                n_trials: ok.len(),
            });
        }
    }
    Ok(AggregateReport { stats, excluded_failures })
}

fn write_rows<T: Serialize>(rows: &[T], writer: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(reader: impl std::io::Read) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn write_records(records: &[TrialRecord], writer: impl std::io::Write) -> Result<()> {
    write_rows(records, writer)
}

pub fn read_records(reader: impl std::io::Read) -> Result<Vec<TrialRecord>> {
    read_rows(reader)
}

pub fn write_aggregate(stats: &[AggregateStats], writer: impl std::io::Write) -> Result<()> {
    write_rows(stats, writer)
}

pub fn read_aggregate(reader: impl std::io::Read) -> Result<Vec<AggregateStats>> {
    read_rows(reader)
}

/// Violations found on one drop by one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditFinding {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub drops: usize,
    pub runs: usize,
    pub findings: Vec<AuditFinding>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Runs the invariant audit for every algorithm of `config` on `config.trials`
/// drops per sweep point.
pub fn run_audit(config: &RunConfig) -> Result<AuditReport> {
    config.validate()?;
    let jobs: Vec<(f64, usize)> = config
        .values
        .iter()
        .flat_map(|v| (0..config.trials).map(move |t| (*v, t)))
        .collect();
    let per_job: Vec<Vec<AuditFinding>> = jobs
        .par_iter()
        .map(|&(value, trial)| {
            let seed = trial_seed(config.base_seed, trial);
            let (scenario, channel) = config.axis.apply(&config.scenario, value)?.realize(seed)?;
            let mut found = Vec::new();
            for &algorithm in &config.algorithms {
                let cfg = config.params.config(algorithm);
                let result = run_algorithm(&scenario, &channel, &cfg)?;
                for violation in audit_allocation(&result, &channel, &scenario.rate_demands_bps, &cfg) {
                    found.push(AuditFinding { seed, algorithm, violation });
                }
            }
            Ok(found)
        })
        .collect::<Result<_>>()?;
    Ok(AuditReport {
        drops: jobs.len(),
        runs: jobs.len() * config.algorithms.len(),
        findings: per_job.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(alg: Algorithm, value: f64, power: f64, failed: bool) -> TrialRecord {
        TrialRecord {
            sweep_axis: SweepAxis::Rate,
            sweep_value: value,
            algorithm: alg,
            trial: 0,
            total_power_w: power,
            nonmux_sc: 60,
            mutsic_sc: 0,
            singsic_sc: 4,
            failed_flag: failed,
            channel_checksum: 0,
        }
    }

    #[test]
    fn aggregate_examples() {
        assert!(aggregate(&[]).is_err());
        let one = aggregate(&[record(Algorithm::Srrh, 1.0, 2.5, false)]).unwrap();
        assert_eq!(one.stats[0].mean_power_w, 2.5);
        assert_eq!(one.stats[0].std_power_w, 0.0);
        let two = aggregate(&[record(Algorithm::Srrh, 1.0, 2.0, false), record(Algorithm::Srrh, 1.0, 4.0, false)]).unwrap();
        assert_eq!(two.stats[0].mean_power_w, 3.0);
        assert!((two.stats[0].std_power_w - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn failures_are_excluded_and_counted() {
        let recs = [record(Algorithm::Srrh, 1.0, 2.0, false), record(Algorithm::Srrh, 1.0, f64::NAN, true)];
        let agg = aggregate(&recs).unwrap();
        assert_eq!(agg.excluded_failures, 1);
        assert_eq!(agg.stats[0].n_trials, 1);
    }

    #[test]
    fn axis_application() {
        let base = ScenarioConfig::default();
        assert_eq!(SweepAxis::Users.apply(&base, 20.0).unwrap().num_users, 20);
        assert_eq!(SweepAxis::Rrhs.apply(&base, 7.0).unwrap().num_rrhs, 7);
        assert!(SweepAxis::Rrhs.apply(&base, 2.5).is_err());
        assert_eq!("Users".parse::<SweepAxis>().unwrap(), SweepAxis::Users);
    }

    #[test]
    fn run_config_from_toml() {
        let cfg = RunConfig::from_toml_str(
            "algorithms = [\"SRRH-LPO\", \"MutSIC-SOPAd\"]\ntrials = 3\naxis = \"users\"\nvalues = [8, 10]\n[scenario]\nnum_subcarriers = 16\n[params]\nrho_w = 0.0\n",
        )
        .unwrap();
        assert_eq!(cfg.algorithms, vec![Algorithm::SrrhLpo, Algorithm::MutSicSopad]);
        assert_eq!(cfg.axis, SweepAxis::Users);
        assert_eq!(cfg.params.rho_w, 0.0);
        assert_eq!(cfg.params.mu, 0.01);
        cfg.validate().unwrap();
        let bad = RunConfig { trials: 0, ..RunConfig::default() };
        assert!(bad.validate().is_err());
    }
}
