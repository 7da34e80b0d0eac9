use std::process::Command;

use noma_das::alloc::Algorithm;
use noma_das::harness::*;
use noma_das::ScenarioConfig;

fn small(trials: usize, algorithms: Vec<Algorithm>) -> RunConfig {
    RunConfig {
        scenario: ScenarioConfig { num_users: 6, num_subcarriers: 16, ..ScenarioConfig::default() },
        algorithms,
        trials,
        base_seed: 40,
        values: vec![2e6, 4e6],
        ..RunConfig::default()
    }
}

fn record(algorithm: Algorithm, trial: usize, power: f64) -> TrialRecord {
    TrialRecord {
        sweep_axis: SweepAxis::Rate,
        sweep_value: 9e6,
        algorithm,
        trial,
        total_power_w: power,
        nonmux_sc: 64,
        mutsic_sc: 0,
        singsic_sc: 0,
        failed_flag: false,
        channel_checksum: 0,
    }
}

fn csv(records: &[TrialRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    write_records(records, &mut out).unwrap();
    out
}

#[test]
fn one_trial_one_algorithm_gives_one_record_per_point() {
    let cfg = RunConfig { values: vec![3e6], ..small(1, vec![Algorithm::SrrhLpo]) };
    let records = run_monte_carlo(&cfg).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].trial, 0);
}

#[test]
fn runs_are_bit_identical() {
    let cfg = small(6, Algorithm::ALL.to_vec());
    let a = run_monte_carlo(&cfg).unwrap();
    let b = run_monte_carlo(&cfg).unwrap();
    assert_eq!(a.len(), 2 * 6 * Algorithm::ALL.len());
    assert_eq!(csv(&a), csv(&b));
}

#[test]
fn algorithms_of_a_trial_share_one_channel() {
    let records = run_monte_carlo(&small(4, Algorithm::ALL.to_vec())).unwrap();
    for group in records.chunk_by(|x, y| x.sweep_value == y.sweep_value && x.trial == y.trial) {
        assert_eq!(group.len(), Algorithm::ALL.len());
        assert!(group.iter().all(|r| r.channel_checksum == group[0].channel_checksum));
    }
    let first: Vec<u64> = records.iter().filter(|r| r.sweep_value == 2e6).map(|r| r.channel_checksum).collect();
    assert_ne!(first[0], first[Algorithm::ALL.len()]);
}

#[test]
fn trial_seeds_xor_the_base() {
    assert_eq!(trial_seed(0b1010, 3), 0b1001);
    assert_eq!(trial_seed(7, 0), 7);
}

#[test]
fn aggregate_examples() {
    let one = aggregate(&[record(Algorithm::OmaDas, 0, 2.0)]).unwrap();
    assert_eq!(one.stats[0].std_power_w, 0.0);
    assert_eq!(one.stats[0].n_trials, 1);
    let two = aggregate(&[record(Algorithm::OmaDas, 0, 2.0), record(Algorithm::OmaDas, 1, 4.0)]).unwrap();
    let s = two.get(Algorithm::OmaDas, 9e6).unwrap();
    assert_eq!(s.mean_power_w, 3.0);
    assert!(s.std_power_w > 0.0);
    assert!(aggregate(&[]).is_err());
}

#[test]
fn failed_trials_are_left_out_of_the_means() {
    let mut bad = record(Algorithm::SrrhOpa, 1, 100.0);
    bad.failed_flag = true;
    let report = aggregate(&[record(Algorithm::SrrhOpa, 0, 1.0), bad]).unwrap();
    assert_eq!(report.excluded_failures, 1);
    assert_eq!(report.stats[0].mean_power_w, 1.0);
}

#[test]
fn csv_round_trips() {
    let records = run_monte_carlo(&small(3, vec![Algorithm::Srrh, Algorithm::MutSicDpa])).unwrap();
    let back = read_records(csv(&records).as_slice()).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in back.iter().zip(&records) {
        assert_eq!(TrialRecord { channel_checksum: 0, ..b.clone() }, *a);
    }
    let stats = aggregate(&records).unwrap().stats;
    let mut out = Vec::new();
    write_aggregate(&stats, &mut out).unwrap();
    assert_eq!(read_aggregate(out.as_slice()).unwrap(), stats);
}

#[test]
fn same_rrh_pairing_never_reports_mutual_subcarriers() {
    let records = run_monte_carlo(&small(8, vec![Algorithm::SrrhLpo, Algorithm::OmaCas])).unwrap();
    assert!(records.iter().all(|r| r.mutsic_sc == 0));
    assert!(records.iter().all(|r| r.nonmux_sc + r.mutsic_sc + r.singsic_sc == 16));
}

#[test]
fn audit_outcome_depends_only_on_the_seed() {
    let cfg = RunConfig { values: vec![6e6], ..small(5, Algorithm::ALL.to_vec()) };
    let a = run_audit(&cfg).unwrap();
    let b = run_audit(&cfg).unwrap();
    assert_eq!(a.drops, 5);
    assert_eq!(a.runs, 5 * Algorithm::ALL.len());
    assert!(a.passed(), "{:?}", a.findings);
    assert_eq!(a.findings.len(), b.findings.len());
}

#[test]
fn sweep_axes_validate_their_values() {
    let base = ScenarioConfig::default();
    assert_eq!(SweepAxis::Users.apply(&base, 20.0).unwrap().num_users, 20);
    assert!(SweepAxis::Rrhs.apply(&base, 2.5).is_err());
    assert_eq!("RRHS".parse::<SweepAxis>().unwrap(), SweepAxis::Rrhs);
    assert!(RunConfig { trials: 0, ..RunConfig::default() }.validate().is_err());
    assert!(RunConfig { axis: SweepAxis::Users, values: vec![65.0], ..RunConfig::default() }.validate().is_err());
}

#[test]
fn run_config_parses_from_toml() {
    let cfg = RunConfig::from_toml_str(
        r#"
        algorithms = ["SRRH-LPO", "MutSIC-SOPAd"]
        trials = 3
        axis = "users"
        values = [10, 12]
        [scenario]
        num_subcarriers = 32
        [params]
        rho_w = 0.0
        "#,
    )
    .unwrap();
    assert_eq!(cfg.algorithms, vec![Algorithm::SrrhLpo, Algorithm::MutSicSopad]);
    assert_eq!(cfg.axis, SweepAxis::Users);
    assert_eq!(cfg.scenario.num_subcarriers, 32);
    assert_eq!(cfg.params.rho_w, 0.0);
    assert_eq!(cfg.params.mu, 0.01);
    cfg.validate().unwrap();
    assert!(RunConfig::from_toml_str("trails = 3").is_err());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_noma-das"))
}

#[test]
fn cli_audit_exits_cleanly() {
    let out = cli().args(["audit", "--drops", "3", "--rates", "5e6"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 violations"));
}

#[test]
fn cli_oracle_reports_every_check() {
    let out = cli().args(["oracle", "--instances", "50", "--drops", "3"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn cli_simulate_and_channel_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "algorithms = [\"OMA-DAS\", \"SRRH\"]\ntrials = 2\nvalues = [3e6]\n[scenario]\nnum_users = 4\nnum_subcarriers = 8\n").unwrap();
    let trials = dir.path().join("trials.csv");
    let summary = dir.path().join("summary.csv");
    let status = cli()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&trials)
        .arg("--aggregate")
        .arg(&summary)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert_eq!(read_records(std::fs::File::open(&trials).unwrap()).unwrap().len(), 4);
    assert_eq!(read_aggregate(std::fs::File::open(&summary).unwrap()).unwrap().len(), 2);

    let gains = dir.path().join("gains.csv");
    let out = cli().args(["channel", "--seed", "5", "--out"]).arg(&gains).output().unwrap();
    assert!(out.status.success());
    let (_, channel) = ScenarioConfig::default().realize(5).unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains(&format!("{:016x}", channel.checksum())));

    let bad = cli().args(["sweep", "--axis", "rrhs", "--values", "0"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
