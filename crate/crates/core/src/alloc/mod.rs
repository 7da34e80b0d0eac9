//! End-to-end allocation strategies.

mod audit;
mod mutual;
mod optimal;
mod phases;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use audit::{audit_allocation, Violation, ViolationKind};
pub use mutual::{exact_conditions_hold, mutual_sic_pairing, MutualMode};
pub use optimal::{constrained_mutual_pa_oracle, optimal_power_allocation, OptimalPaOutcome, PaSolution};
pub use phases::{oma_phase, single_sic_pairing, worst_best_h, PairingPower};
pub use state::{
    power_tensor, user_powers, user_rates, AllocationState, FrozenPair, Phase, PhaseRun, Slot, SubcarrierUse, Trace,
    TraceStep,
};

use crate::error::{invalid, Result};
use crate::scenario::{ChannelTensor, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "OMA-CAS")]
    OmaCas,
    #[serde(rename = "NOMA-CAS")]
    NomaCas,
    #[serde(rename = "OMA-DAS")]
    OmaDas,
    #[serde(rename = "SRRH")]
    Srrh,
    #[serde(rename = "SRRH-LPO")]
    SrrhLpo,
    #[serde(rename = "SRRH-OPA")]
    SrrhOpa,
    #[serde(rename = "MutSIC-UC")]
    MutSicUc,
    #[serde(rename = "MutSIC-DPA")]
    MutSicDpa,
    #[serde(rename = "MutSIC-OPAd")]
    MutSicOpad,
    #[serde(rename = "MutSIC-SOPAd")]
    MutSicSopad,
    #[serde(rename = "MutAndSingSIC")]
    MutAndSingSic,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Algorithm::OmaCas,
        Algorithm::NomaCas,
        Algorithm::OmaDas,
        Algorithm::Srrh,
        Algorithm::SrrhLpo,
        Algorithm::SrrhOpa,
        Algorithm::MutSicUc,
        Algorithm::MutSicDpa,
        Algorithm::MutSicOpad,
        Algorithm::MutSicSopad,
        Algorithm::MutAndSingSic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::OmaCas => "OMA-CAS",
            Algorithm::NomaCas => "NOMA-CAS",
            Algorithm::OmaDas => "OMA-DAS",
            Algorithm::Srrh => "SRRH",
            Algorithm::SrrhLpo => "SRRH-LPO",
            Algorithm::SrrhOpa => "SRRH-OPA",
            Algorithm::MutSicUc => "MutSIC-UC",
            Algorithm::MutSicDpa => "MutSIC-DPA",
            Algorithm::MutSicOpad => "MutSIC-OPAd",
            Algorithm::MutSicSopad => "MutSIC-SOPAd",
            Algorithm::MutAndSingSic => "MutAndSingSIC",
        }
    }

    /// Centralized variants only see the center RRH.
    pub fn centralized(self) -> bool {
        matches!(self, Algorithm::OmaCas | Algorithm::NomaCas)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = |t: &str| t.to_ascii_lowercase().replace(['-', '_', '&'], "");
        let key = norm(s);
        Algorithm::ALL
            .into_iter()
            .find(|a| norm(a.name()) == key)
            .ok_or_else(|| invalid(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    /// Minimum power saving for accepting an assignment, in watts.
    pub rho_w: f64,
    /// Relative safety margin on SIC power ratios.
    pub mu: f64,
    /// Decay factor of fractional transmit power allocation.
    pub alpha: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self { algorithm: Algorithm::SrrhLpo, rho_w: 1e-3, mu: 0.01, alpha: 0.5 }
    }
}

impl AlgorithmConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self { algorithm, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_w >= 0.0) {
            return Err(invalid("rho must be non-negative"));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(invalid("mu must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Subcarrier multiplexing statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MuxCounts {
    /// Subcarriers with at most one user, including unused ones.
    pub non_multiplexed: usize,
    pub mutual_sic: usize,
    pub single_sic: usize,
    pub unused: usize,
}

impl MuxCounts {
    pub fn of(uses: &[SubcarrierUse]) -> Self {
        let mut c = MuxCounts::default();
        for u in uses {
            match u {
                SubcarrierUse::Unused => c.unused += 1,
                SubcarrierUse::SingleSic { .. } => c.single_sic += 1,
                SubcarrierUse::MutualSic { .. } => c.mutual_sic += 1,
                SubcarrierUse::Sole { .. } => {}
            }
        }
        c.non_multiplexed = uses.len() - c.mutual_sic - c.single_sic;
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub algorithm: Algorithm,
    /// Final use of every subcarrier. RRH indices refer to the channel the
    /// algorithm ran on, which is the center RRH alone for centralized variants.
    pub uses: Vec<SubcarrierUse>,
    pub total_power_w: f64,
    pub user_powers_w: Vec<f64>,
    pub counts: MuxCounts,
    pub trace: Trace,
    pub optimal_pa: Option<OptimalPaOutcome>,
    /// Set when the optimal power step fell back to its input.
    pub failed: bool,
}

/// Phases 1 and 2, then mutual-SIC pairing with joint adjustment of the
/// winner, then same-RRH pairing on what is left.
pub fn mut_and_sing(state: &mut AllocationState, channel: &ChannelTensor, config: &AlgorithmConfig) {
    worst_best_h(state, channel);
    oma_phase(state, channel, config);
    mutual_sic_pairing(state, channel, config, MutualMode::Sopad);
    single_sic_pairing(state, channel, config, PairingPower::Lpo);
}

/// The channel an algorithm actually sees.
pub fn effective_channel(channel: &ChannelTensor, algorithm: Algorithm) -> ChannelTensor {
    if algorithm.centralized() {
        channel.restrict_to_rrh(0)
    } else {
        channel.clone()
    }
}

pub fn run_algorithm(scenario: &Scenario, channel: &ChannelTensor, config: &AlgorithmConfig) -> Result<AllocationResult> {
    if scenario.num_users != channel.num_users() || scenario.num_subcarriers != channel.num_subcarriers() {
        return Err(invalid("scenario and channel dimensions differ"));
    }
    run_on_channel(channel, &scenario.rate_demands_bps, config)
}

/// Runs one algorithm on a channel with explicit per-user demands.
pub fn run_on_channel(channel: &ChannelTensor, demands_bps: &[f64], config: &AlgorithmConfig) -> Result<AllocationResult> {
    config.validate()?;
    let ch = effective_channel(channel, config.algorithm);
    let mut state = AllocationState::new(&ch, demands_bps)?;
    use Algorithm::*;
    match config.algorithm {
        MutAndSingSic => mut_and_sing(&mut state, &ch, config),
        alg => {
            worst_best_h(&mut state, &ch);
            oma_phase(&mut state, &ch, config);
            match alg {
                NomaCas | Srrh => single_sic_pairing(&mut state, &ch, config, PairingPower::Ftpa),
                SrrhLpo | SrrhOpa => single_sic_pairing(&mut state, &ch, config, PairingPower::Lpo),
                MutSicUc => mutual_sic_pairing(&mut state, &ch, config, MutualMode::Uc),
                MutSicDpa => mutual_sic_pairing(&mut state, &ch, config, MutualMode::Dpa),
                MutSicOpad => mutual_sic_pairing(&mut state, &ch, config, MutualMode::Opad),
                MutSicSopad => mutual_sic_pairing(&mut state, &ch, config, MutualMode::Sopad),
                OmaCas | OmaDas | MutAndSingSic => {}
            }
        }
    }
    let mut uses = state.snapshot();
    let mut optimal_pa = None;
    let mut failed = false;
    if config.algorithm == SrrhOpa {
        let outcome = optimal_power_allocation(&uses, &ch, demands_bps)?;
        failed = outcome.fallback;
        uses = outcome.uses.clone();
        optimal_pa = Some(outcome);
    }
    let user_powers_w = user_powers(&uses, ch.num_users());
    Ok(AllocationResult {
        algorithm: config.algorithm,
        total_power_w: user_powers_w.iter().sum(),
        user_powers_w,
        counts: MuxCounts::of(&uses),
        uses,
        trace: state.trace,
        optimal_pa,
        failed,
    })
}
