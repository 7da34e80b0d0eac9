//! Cell geometry, user drops, and the three-dimensional channel-gain tensor.
//!
//! The cell is a flat-top hexagon centered at the origin. One RRH sits at the
//! center and the others on a circle of radius `2 R_d / 3`. Each user-RRH link
//! gets distance-dependent path loss, one lognormal shadowing draw, and an
//! independent frequency-selective Rayleigh channel whose subcarrier responses
//! come from an exponential power-delay profile.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::solver::solve_scalar;

/// Seeded generator used for every drop.
pub type DropRng = ChaCha8Rng;

pub fn drop_rng(seed: u64) -> DropRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Membership test for the flat-top hexagon of circumradius `radius`.
pub fn in_hexagon(p: &Point, radius: f64) -> bool {
    let s3 = 3f64.sqrt();
    p.y.abs() <= 0.5 * s3 * radius && s3 * p.x.abs() + p.y.abs() <= s3 * radius
}

/// Mean distance from the center of a uniform point in the hexagon.
pub fn hexagon_mean_distance(radius: f64) -> f64 {
    radius * (1.0 / 3.0 + 3f64.ln() / 4.0)
}

/// How the configured shadowing spread in dB is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowingSpread {
    #[default]
    StdDev,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathLoss {
    /// `PL(dB) = intercept_db + 10 exponent log10(d / 1 km)`.
    LogDistance { intercept_db: f64, exponent: f64 },
    /// Unit gain regardless of distance.
    Unit,
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss::LogDistance { intercept_db: 128.1, exponent: 3.76 }
    }
}

impl PathLoss {
    pub fn linear_gain(&self, distance_m: f64) -> f64 {
        match *self {
            PathLoss::LogDistance { intercept_db, exponent } => {
                let db = intercept_db + 10.0 * exponent * (distance_m / 1000.0).log10();
                10f64.powf(-db / 10.0)
            }
            PathLoss::Unit => 1.0,
        }
    }
}

/// Propagation model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModel {
    pub path_loss: PathLoss,
    pub shadowing_db: f64,
    pub shadowing_spread: ShadowingSpread,
    /// When false every subcarrier response is exactly 1.
    pub fading: bool,
    pub rms_delay_spread_s: f64,
    pub tap_spacing_s: f64,
    pub num_taps: usize,
    pub min_distance_m: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            path_loss: PathLoss::default(),
            shadowing_db: 8.0,
            shadowing_spread: ShadowingSpread::StdDev,
            fading: true,
            rms_delay_spread_s: 500e-9,
            tap_spacing_s: 100e-9,
            num_taps: 32,
            min_distance_m: 10.0,
        }
    }
}

impl ChannelModel {
    /// No fading, no shadowing, unit path loss.
    pub fn flat() -> Self {
        Self { path_loss: PathLoss::Unit, shadowing_db: 0.0, fading: false, ..Self::default() }
    }

    /// Standard deviation of the shadowing in dB.
    pub fn shadowing_std_db(&self) -> f64 {
        match self.shadowing_spread {
            ShadowingSpread::StdDev => self.shadowing_db,
            ShadowingSpread::Variance => self.shadowing_db.sqrt(),
        }
    }

    /// Normalized tap powers of the exponential profile, with the decay
    /// constant chosen so that the discrete profile has the configured RMS
    /// delay spread.
    pub fn tap_powers(&self) -> Result<Vec<f64>> {
        if self.num_taps == 0 || self.tap_spacing_s <= 0.0 {
            return Err(invalid("fading profile needs at least one tap and a positive spacing"));
        }
        let target = self.rms_delay_spread_s / self.tap_spacing_s;
        let n = self.num_taps as f64;
        let uniform_rms = ((n * n - 1.0) / 12.0).sqrt();
        if self.num_taps == 1 || target <= 0.0 {
            return Ok(profile(self.num_taps, 1e-9));
        }
        if target >= uniform_rms {
            return Err(invalid(format!(
                "{} taps at {} s cannot reach an RMS delay spread of {} s",
                self.num_taps, self.tap_spacing_s, self.rms_delay_spread_s
            )));
        }
        // RMS spread grows monotonically with the decay constant (in tap units).
        let report = solve_scalar(|decay| rms_spread(&profile(self.num_taps, decay)) - target, 1e-6, 1e6, 1e-13)?;
        Ok(profile(self.num_taps, report.root()))
    }
}

fn profile(num_taps: usize, decay: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..num_taps).map(|l| (-(l as f64) / decay).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// RMS delay spread of a normalized profile, in tap units.
pub fn rms_spread(powers: &[f64]) -> f64 {
    let mean: f64 = powers.iter().enumerate().map(|(l, p)| l as f64 * p).sum();
    let second: f64 = powers.iter().enumerate().map(|(l, p)| (l as f64).powi(2) * p).sum();
    (second - mean * mean).max(0.0).sqrt()
}

/// Scenario parameters as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub cell_radius_m: f64,
    pub num_users: usize,
    pub num_rrhs: usize,
    pub num_subcarriers: usize,
    pub bandwidth_hz: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd: f64,
    pub rate_demand_bps: f64,
    pub seed: u64,
    pub channel: ChannelModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 500.0,
            num_users: 15,
            num_rrhs: 4,
            num_subcarriers: 64,
            bandwidth_hz: 10e6,
            noise_psd: 4e-21,
            rate_demand_bps: 9e6,
            seed: 1,
            channel: ChannelModel::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_rrhs == 0 || self.num_subcarriers == 0 {
            return Err(invalid("users, RRHs and subcarriers must all be at least 1"));
        }
        if self.num_users > self.num_subcarriers {
            return Err(invalid(format!(
                "{} users cannot each get one of {} subcarriers",
                self.num_users, self.num_subcarriers
            )));
        }
        if !(self.cell_radius_m > 0.0 && self.bandwidth_hz > 0.0 && self.noise_psd > 0.0 && self.rate_demand_bps > 0.0) {
            return Err(invalid("radius, bandwidth, noise PSD and rate demand must be positive"));
        }
        Ok(())
    }

    /// Draws users for `seed` and builds the scenario plus its channel.
    pub fn realize(&self, seed: u64) -> Result<(Scenario, ChannelTensor)> {
        self.validate()?;
        let mut rng = drop_rng(seed);
        let rrh_positions = place_rrhs(self.num_rrhs, self.cell_radius_m)?;
        let user_positions =
            drop_users(self.num_users, self.cell_radius_m, &rrh_positions, self.channel.min_distance_m, &mut rng)?;
        let scenario = Scenario {
            cell_radius_m: self.cell_radius_m,
            num_users: self.num_users,
            num_rrhs: self.num_rrhs,
            num_subcarriers: self.num_subcarriers,
            bandwidth_hz: self.bandwidth_hz,
            noise_psd_w_per_hz: self.noise_psd,
            rate_demands_bps: vec![self.rate_demand_bps; self.num_users],
            rrh_positions,
            user_positions,
            rng_seed: seed,
            channel: self.channel.clone(),
        };
        let channel = generate_channel(&scenario, &mut rng)?;
        Ok((scenario, channel))
    }
}

/// One realized cell: geometry, demands and propagation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cell_radius_m: f64,
    pub num_users: usize,
    pub num_rrhs: usize,
    pub num_subcarriers: usize,
    pub bandwidth_hz: f64,
    pub noise_psd_w_per_hz: f64,
    pub rate_demands_bps: Vec<f64>,
    pub rrh_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub rng_seed: u64,
    pub channel: ChannelModel,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.num_users > self.num_subcarriers {
            return Err(invalid("more users than subcarriers"));
        }
        if self.rate_demands_bps.len() != self.num_users || self.user_positions.len() != self.num_users {
            return Err(invalid("per-user arrays do not match the user count"));
        }
        if self.rrh_positions.len() != self.num_rrhs {
            return Err(invalid("RRH positions do not match the RRH count"));
        }
        if self.rate_demands_bps.iter().any(|r| !(*r > 0.0)) {
            return Err(invalid("rate demands must be positive"));
        }
        if !(self.bandwidth_hz > 0.0 && self.noise_psd_w_per_hz > 0.0) {
            return Err(invalid("bandwidth and noise PSD must be positive"));
        }
        let r = self.cell_radius_m * (1.0 + 1e-12);
        if self.user_positions.iter().chain(&self.rrh_positions).any(|p| !in_hexagon(p, r)) {
            return Err(invalid("position outside the cell"));
        }
        Ok(())
    }

    pub fn b_over_s(&self) -> f64 {
        self.bandwidth_hz / self.num_subcarriers as f64
    }
}

/// Noise power per subcarrier, `N0 B / S`.
pub fn noise_power(scenario: &Scenario) -> f64 {
    scenario.noise_psd_w_per_hz * scenario.bandwidth_hz / scenario.num_subcarriers as f64
}

/// Center RRH plus `num_rrhs - 1` RRHs evenly spaced on the `2 R_d / 3` circle from angle 0.
pub fn place_rrhs(num_rrhs: usize, cell_radius_m: f64) -> Result<Vec<Point>> {
    if num_rrhs == 0 {
        return Err(invalid("at least one RRH is required"));
    }
    let ring = 2.0 * cell_radius_m / 3.0;
    let outer = num_rrhs - 1;
    let mut out = vec![Point::ORIGIN];
    out.extend((0..outer).map(|i| {
        let a = 2.0 * PI * i as f64 / outer as f64;
        Point { x: ring * a.cos(), y: ring * a.sin() }
    }));
    Ok(out)
}

/// Uniform user positions in the hexagon, at least `min_distance_m` from every RRH.
pub fn drop_users<R: Rng>(
    num_users: usize,
    cell_radius_m: f64,
    rrhs: &[Point],
    min_distance_m: f64,
    rng: &mut R,
) -> Result<Vec<Point>> {
    if num_users == 0 {
        return Err(invalid("at least one user is required"));
    }
    let mut users = Vec::with_capacity(num_users);
    while users.len() < num_users {
        let r = cell_radius_m * rng.random::<f64>().sqrt();
        let a = 2.0 * PI * rng.random::<f64>();
        let p = Point { x: r * a.cos(), y: r * a.sin() };
        if in_hexagon(&p, cell_radius_m) && rrhs.iter().all(|q| p.distance(q) >= min_distance_m) {
            users.push(p);
        }
    }
    Ok(users)
}

/// Linear power gains `|h|^2` for every (user, subcarrier, RRH) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    num_users: usize,
    num_subcarriers: usize,
    num_rrhs: usize,
    gains: Vec<f64>,
    pub noise_power_w: f64,
    pub bandwidth_hz: f64,
}

impl ChannelTensor {
    pub fn from_fn<F>(
        num_users: usize,
        num_subcarriers: usize,
        num_rrhs: usize,
        noise_power_w: f64,
        bandwidth_hz: f64,
        mut gain: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        let mut gains = Vec::with_capacity(num_users * num_subcarriers * num_rrhs);
        for k in 0..num_users {
            for n in 0..num_subcarriers {
                for r in 0..num_rrhs {
                    gains.push(gain(k, n, r));
                }
            }
        }
        Self::from_vec(num_users, num_subcarriers, num_rrhs, gains, noise_power_w, bandwidth_hz)
    }

    pub fn from_vec(
        num_users: usize,
        num_subcarriers: usize,
        num_rrhs: usize,
        gains: Vec<f64>,
        noise_power_w: f64,
        bandwidth_hz: f64,
    ) -> Result<Self> {
        if gains.len() != num_users * num_subcarriers * num_rrhs {
            return Err(invalid("gain count does not match dimensions"));
        }
        if gains.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(invalid("gains must be positive and finite"));
        }
        if !(noise_power_w > 0.0 && bandwidth_hz > 0.0) {
            return Err(invalid("noise power and bandwidth must be positive"));
        }
        Ok(Self { num_users, num_subcarriers, num_rrhs, gains, noise_power_w, bandwidth_hz })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_rrhs(&self) -> usize {
        self.num_rrhs
    }

    #[inline]
    pub fn gain(&self, user: usize, subcarrier: usize, rrh: usize) -> f64 {
        self.gains[(user * self.num_subcarriers + subcarrier) * self.num_rrhs + rrh]
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn b_over_s(&self) -> f64 {
        self.bandwidth_hz / self.num_subcarriers as f64
    }

    /// The same channel seen through a single RRH, e.g. the center antenna for CAS.
    pub fn restrict_to_rrh(&self, rrh: usize) -> Self {
        let gains = (0..self.num_users)
            .flat_map(|k| (0..self.num_subcarriers).map(move |n| (k, n)))
            .map(|(k, n)| self.gain(k, n, rrh))
            .collect();
        Self { num_rrhs: 1, gains, ..self.clone() }
    }

    /// FNV-1a over the dimensions, noise power and gain bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.num_users as u64);
        feed(self.num_subcarriers as u64);
        feed(self.num_rrhs as u64);
        feed(self.noise_power_w.to_bits());
        for g in &self.gains {
            feed(g.to_bits());
        }
        h
    }

    /// CSV with one `user,subcarrier,rrh,gain` row per link.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("user,subcarrier,rrh,gain\n");
        for k in 0..self.num_users {
            for n in 0..self.num_subcarriers {
                for r in 0..self.num_rrhs {
                    let _ = writeln!(out, "{k},{n},{r},{:e}", self.gain(k, n, r));
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Rebuilds a tensor from [`ChannelTensor::to_csv`] output.
    pub fn from_csv(text: &str, noise_power_w: f64, bandwidth_hz: f64) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            user: usize,
            subcarrier: usize,
            rrh: usize,
            gain: f64,
        }
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(text.as_bytes()).deserialize() {
            let row: Row = row?;
            rows.push(row);
        }
        let dim = |f: fn(&Row) -> usize| rows.iter().map(f).max().map_or(0, |m| m + 1);
        let (nk, ns, nr) = (dim(|r| r.user), dim(|r| r.subcarrier), dim(|r| r.rrh));
        let mut gains = vec![f64::NAN; nk * ns * nr];
        for r in &rows {
            gains[(r.user * ns + r.subcarrier) * nr + r.rrh] = r.gain;
        }
        Self::from_vec(nk, ns, nr, gains, noise_power_w, bandwidth_hz)
    }
}

/// Per-subcarrier frequency response of one Rayleigh tapped-delay-line channel.
pub fn frequency_response<R: Rng>(
    tap_powers: &[f64],
    tap_spacing_s: f64,
    num_subcarriers: usize,
    subcarrier_spacing_hz: f64,
    rng: &mut R,
) -> Vec<Complex64> {
    let taps: Vec<Complex64> = tap_powers
        .iter()
        .map(|p| {
            let s = (p / 2.0).sqrt();
            Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal))
        })
        .collect();
    (0..num_subcarriers)
        .map(|n| {
            let f = n as f64 * subcarrier_spacing_hz;
            taps.iter()
                .enumerate()
                .map(|(l, a)| a * Complex64::from_polar(1.0, -2.0 * PI * f * l as f64 * tap_spacing_s))
                .sum()
        })
        .collect()
}

/// Generates the gain tensor for a realized scenario.
pub fn generate_channel<R: Rng>(scenario: &Scenario, rng: &mut R) -> Result<ChannelTensor> {
    scenario.validate()?;
    let model = &scenario.channel;
    let taps = if model.fading { model.tap_powers()? } else { Vec::new() };
    let shadow_std = model.shadowing_std_db();
    let (nk, ns, nr) = (scenario.num_users, scenario.num_subcarriers, scenario.num_rrhs);
    let mut gains = vec![0.0; nk * ns * nr];
    for k in 0..nk {
        for r in 0..nr {
            let d = scenario.user_positions[k].distance(&scenario.rrh_positions[r]).max(model.min_distance_m);
            let shadow_db = if shadow_std > 0.0 { shadow_std * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
            let large_scale = model.path_loss.linear_gain(d) * 10f64.powf(shadow_db / 10.0);
            let response = if model.fading {
                frequency_response(&taps, model.tap_spacing_s, ns, scenario.b_over_s(), rng)
            } else {
                vec![Complex64::new(1.0, 0.0); ns]
            };
            for n in 0..ns {
                gains[(k * ns + n) * nr + r] = large_scale * response[n].norm_sqr();
            }
        }
    }
    ChannelTensor::from_vec(nk, ns, nr, gains, noise_power(scenario), scenario.bandwidth_hz)
}
