//! Brute-force cross-checks of the closed forms and optimizers.
//!
//! Each check draws random instances from a seeded generator, computes the
//! quantity the fast way and an independent slow way, and records the worst
//! discrepancy. The slow paths never call the code they check.

use rand::Rng;
use serde::Serialize;

use crate::alloc::{
    constrained_mutual_pa_oracle, optimal_power_allocation, run_algorithm, Algorithm, AlgorithmConfig,
};
use crate::mutual_sic::{
    delta_second, dpa_adjust, edge_stationarity, mutual_sic_feasible, opad_optimize, power_window,
    waterfill_second_power, OpadInput, PairGains,
};
use crate::scenario::{drop_rng, DropRng, ScenarioConfig};
use crate::waterfill::{
    delta_power_noma, delta_power_oma, lpo_power, shifted_waterline_second, waterline_add, waterline_from_rate,
    waterline_rate_shift,
};

/// Outcome of one family of comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    /// Largest observed discrepancy in the check's own units.
    pub worst: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, instances: 0, failures: 0, worst: 0.0, tolerance }
    }

    /// Records a discrepancy; positive values above the tolerance fail.
    fn observe(&mut self, discrepancy: f64) {
        self.instances += 1;
        if discrepancy.is_nan() || discrepancy > self.tolerance {
            self.failures += 1;
        }
        if discrepancy.is_nan() || discrepancy > self.worst {
            self.worst = discrepancy;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.instances > 0
    }
}

fn log_uniform(rng: &mut DropRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Rate carried by clipped waterfilling at waterline `w`, in bits.
fn clipped_bits(gains: &[f64], w: f64, sigma2: f64) -> f64 {
    gains.iter().map(|g| (w * g / sigma2).max(1.0).log2()).sum()
}

/// Waterline for `bits` by plain bisection on the clipped waterfilling rate.
fn bisect_waterline(gains: &[f64], bits: f64, sigma2: f64) -> f64 {
    let mut lo = gains.iter().map(|g| sigma2 / g).fold(f64::INFINITY, f64::min);
    let mut hi = lo;
    while clipped_bits(gains, hi, sigma2) < bits {
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if clipped_bits(gains, mid, sigma2) < bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sole_power(gains: &[f64], w: f64, sigma2: f64) -> f64 {
    gains.iter().map(|g| w - sigma2 / g).sum()
}

/// Closed-form waterlines (initial, one added subcarrier, rate shift) against bisection.
pub fn check_waterlines(rng: &mut DropRng, instances: usize) -> OracleCheck {
    let mut check = OracleCheck::new("waterline closed forms vs bisection", 1e-9);
    let sigma2 = 1.0;
    let bs = 1.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let gains: Vec<f64> = (0..n).map(|_| log_uniform(rng, 0.1, 100.0)).collect();
        let floor = gains.iter().map(|g| sigma2 / g).fold(0.0, f64::max);
        // Enough rate that every subcarrier stays active.
        let min_bits = clipped_bits(&gains, floor, sigma2);
        let bits = min_bits + rng.random::<f64>() * 10.0 + 1e-3;
        let w = waterline_from_rate(&gains, bits * bs, sigma2, bs).unwrap();
        let mut worst = rel(w, bisect_waterline(&gains, bits, sigma2));

        let g_new = log_uniform(rng, sigma2 / w * 1.0001, 100.0 * sigma2 / w);
        let mut grown = gains.clone();
        grown.push(g_new);
        let w_add = waterline_add(w, n, g_new, sigma2);
        if w_add >= grown.iter().map(|g| sigma2 / g).fold(0.0, f64::max) {
            worst = worst.max(rel(w_add, bisect_waterline(&grown, bits, sigma2)));
        }

        let shift = rng.random::<f64>() * bits * 0.5;
        if let Ok(w_shift) = waterline_rate_shift(w, -shift * bs, n, bs, floor) {
            worst = worst.max(rel(w_shift, bisect_waterline(&gains, bits - shift, sigma2)));
        }
        check.observe(worst);
    }
    check
}

/// OMA and pairing power deltas against recomputing the total power from scratch.
pub fn check_deltas(rng: &mut DropRng, instances: usize) -> OracleCheck {
    let mut check = OracleCheck::new("power deltas vs recomputed totals", 1e-9);
    let sigma2 = 1.0;
    let bs = 1.0;
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let gains: Vec<f64> = (0..n).map(|_| log_uniform(rng, 0.1, 100.0)).collect();
        let floor = gains.iter().map(|g| sigma2 / g).fold(0.0, f64::max);
        let bits = clipped_bits(&gains, floor, sigma2) + rng.random::<f64>() * 10.0 + 1e-3;
        let w = waterline_from_rate(&gains, bits * bs, sigma2, bs).unwrap();
        let before = sole_power(&gains, w, sigma2);
        let scale = before.max(1.0);

        let g_new = log_uniform(rng, sigma2 / w * 1.0001, 100.0 * sigma2 / w);
        let w_add = waterline_add(w, n, g_new, sigma2);
        let mut grown = gains.clone();
        grown.push(g_new);
        let mut worst = 0.0f64;
        if w_add >= grown.iter().map(|g| sigma2 / g).fold(0.0, f64::max) {
            let w_re = bisect_waterline(&grown, bits, sigma2);
            let recomputed = sole_power(&grown, w_re, sigma2) - before;
            worst = worst.max((delta_power_oma(w, w_add, n, g_new, sigma2) - recomputed).abs() / scale);
        }

        let g1 = log_uniform(rng, 0.1, 100.0);
        let g2 = g1 * rng.random_range(0.05..0.95);
        let p1 = log_uniform(rng, 0.01, 10.0);
        let p2 = p1 * rng.random_range(1.0..20.0);
        let w2 = shifted_waterline_second(w, p2, p1, g2, sigma2, n);
        if w2 >= floor {
            let pair_bits = (1.0 + p2 * g2 / (p1 * g2 + sigma2)).log2();
            let w_re = bisect_waterline(&gains, bits - pair_bits, sigma2);
            let recomputed = sole_power(&gains, w_re, sigma2) + p2 - before;
            worst = worst.max((delta_power_noma(w, w2, n, p2) - recomputed).abs() / scale);
        }
        check.observe(worst);
    }
    check
}

/// Locally optimal second-user power against a dense grid over the admissible range.
pub fn check_lpo_grid(rng: &mut DropRng, instances: usize, grid: usize) -> OracleCheck {
    let mut check = OracleCheck::new("LPO vs grid minimization", 1e-9);
    let sigma2 = 1.0;
    let mu = 0.01;
    for _ in 0..instances {
        let n = rng.random_range(1..=8);
        let w = log_uniform(rng, 0.5, 50.0);
        let g2 = log_uniform(rng, 0.1, 10.0);
        let p1 = log_uniform(rng, 0.01, 5.0);
        let Ok(p2) = lpo_power(w, p1, g2, sigma2, n, mu) else { continue };
        let cost = |p: f64| delta_power_noma(w, shifted_waterline_second(w, p, p1, g2, sigma2, n), n, p);
        let lower = if p2 < p1 * (1.0 + mu) * (1.0 - 1e-12) { p1 } else { p1 * (1.0 + mu) };
        let lower = lower.min(p2);
        let upper = (p2 * 4.0).max(lower * 4.0);
        let best_grid = (0..=grid)
            .map(|i| cost(lower + (upper - lower) * i as f64 / grid as f64))
            .fold(f64::INFINITY, f64::min);
        let scale = w * n as f64;
        check.observe((cost(p2) - best_grid) / scale);
    }
    check
}

fn random_pair(rng: &mut DropRng) -> PairGains {
    loop {
        let g = PairGains::new(
            log_uniform(rng, 0.1, 100.0),
            log_uniform(rng, 0.1, 100.0),
            log_uniform(rng, 0.1, 100.0),
            log_uniform(rng, 0.1, 100.0),
        );
        if mutual_sic_feasible(&g) {
            return g;
        }
    }
}

/// Joint power adjustment: interior stationarity and never worse than clamping.
pub fn check_opad(rng: &mut DropRng, instances: usize) -> (OracleCheck, OracleCheck) {
    let mut stationarity = OracleCheck::new("OPAd stationarity residual", 1e-8);
    let mut dominance = OracleCheck::new("OPAd joint delta <= DPA", 1e-12);
    let sigma2 = 1.0;
    let mu = 0.01;
    let mut done = 0;
    while done < instances {
        let gains = random_pair(rng);
        let w1 = log_uniform(rng, 0.5, 50.0);
        let w2 = log_uniform(rng, 0.5, 50.0);
        if gains.g11 * w1 <= sigma2 || gains.g22 * w2 <= sigma2 {
            continue;
        }
        let input = OpadInput {
            sigma2,
            n_sole_1: rng.random_range(2..=6),
            n_sole_2: rng.random_range(1..=6),
            mu,
            initial_p1_w: w1 - sigma2 / gains.g11,
            waterline1_w: w1,
            waterline2_w: w2,
            floor1_w: w1 * rng.random_range(0.05..0.9),
            floor2_w: w2 * rng.random_range(0.05..0.9),
        };
        let p1 = input.initial_p1_w;
        let (lo, hi) = power_window(&gains, p1);
        if (1.0 + mu) * lo > (1.0 - mu) * hi {
            continue;
        }
        let wf = waterfill_second_power(w2, gains.g22, sigma2, input.n_sole_2);
        let p2 = dpa_adjust(wf, &gains, p1, mu);
        let w2_after = w2 * (-(p2 * gains.g22 / sigma2).ln_1p() / input.n_sole_2 as f64).exp();
        if w2_after < input.floor2_w {
            continue;
        }
        done += 1;
        let dpa = delta_second(w2, p2, gains.g22, sigma2, input.n_sole_2);
        match opad_optimize(&gains, &input) {
            Ok(sol) => {
                let scale = w1 * input.n_sole_1 as f64 + w2 * input.n_sole_2 as f64;
                dominance.observe((sol.total_delta_w() - dpa) / scale);
                if sol.residual.is_some() {
                    let slope = sol.p2_w / sol.p1_w;
                    stationarity.observe(edge_stationarity(&gains, &input, slope, sol.p1_w).abs());
                }
            }
            Err(_) => dominance.observe(f64::INFINITY),
        }
    }
    (stationarity, dominance)
}

/// Optimal power allocation on SRRH-LPO assignments: KKT residual and no
/// increase over the greedy powers.
pub fn check_optimal_pa(base: &ScenarioConfig, seeds: impl Iterator<Item = u64>) -> (OracleCheck, OracleCheck) {
    let mut residual = OracleCheck::new("optimal PA KKT residual", 1e-6);
    let mut dominance = OracleCheck::new("optimal PA <= SRRH-LPO power", 1e-9);
    for seed in seeds {
        let (scenario, channel) = base.realize(seed).expect("valid scenario");
        let lpo = run_algorithm(&scenario, &channel, &AlgorithmConfig::new(Algorithm::SrrhLpo)).expect("allocation");
        let out = optimal_power_allocation(&lpo.uses, &channel, &scenario.rate_demands_bps).expect("valid assignment");
        residual.observe(if out.fallback { f64::INFINITY } else { out.kkt_residual });
        dominance.observe((out.total_power_w - lpo.total_power_w) / lpo.total_power_w);
    }
    (residual, dominance)
}

/// Small cells where the constrained oracle is tractable.
pub fn tiny_scenario(num_subcarriers: usize) -> ScenarioConfig {
    ScenarioConfig {
        num_users: 3,
        num_subcarriers,
        bandwidth_hz: 156_250.0 * num_subcarriers as f64,
        rate_demand_bps: 600e3,
        ..ScenarioConfig::default()
    }
}

/// Exhaustive constrained optimum against the sequential mutual-SIC powers.
pub fn check_mutual_oracle(instances: usize, base_seed: u64) -> OracleCheck {
    let mut check = OracleCheck::new("constrained oracle <= sequential mutual-SIC PA", 1e-9);
    let modes = [Algorithm::MutSicDpa, Algorithm::MutSicOpad, Algorithm::MutSicSopad];
    let mut seed = base_seed;
    let mut attempts = 0;
    while check.instances < instances && attempts < 200 * instances {
        attempts += 1;
        seed = seed.wrapping_add(1);
        let s = 4 + (seed % 5) as usize;
        let (scenario, channel) = tiny_scenario(s).realize(seed).expect("valid scenario");
        let alg = modes[(seed % 3) as usize];
        let cfg = AlgorithmConfig { rho_w: 1e-9, ..AlgorithmConfig::new(alg) };
        let greedy = run_algorithm(&scenario, &channel, &cfg).expect("allocation");
        if !(1..=2).contains(&greedy.counts.mutual_sic) {
            continue;
        }
        let discrepancy = match constrained_mutual_pa_oracle(&greedy.uses, &channel, &scenario.rate_demands_bps) {
            Ok(sol) => (sol.total_power_w - greedy.total_power_w) / greedy.total_power_w,
            Err(_) => f64::INFINITY,
        };
        check.observe(discrepancy);
    }
    check
}

/// Runs every check with the given instance counts.
pub fn run_all(seed: u64, instances: usize, drops: usize) -> Vec<OracleCheck> {
    let mut rng = drop_rng(seed);
    let mut out = vec![
        check_waterlines(&mut rng, instances),
        check_deltas(&mut rng, instances),
        check_lpo_grid(&mut rng, instances, 10_000),
    ];
    let (stat, dom) = check_opad(&mut rng, instances);
    out.push(stat);
    out.push(dom);
    let (res, dom) = check_optimal_pa(&ScenarioConfig::default(), (0..drops as u64).map(|t| seed ^ t));
    out.push(res);
    out.push(dom);
    out.push(check_mutual_oracle(drops, seed));
    out
}
