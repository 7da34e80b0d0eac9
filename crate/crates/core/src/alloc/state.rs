//! Mutable allocation state shared by all phases.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scenario::ChannelTensor;
use crate::waterfill::{shannon, SoleLink, UserWaterState};

/// What a subcarrier currently carries, inside the allocator.
///
/// Sole links take their power from the owner's waterline; paired links hold
/// frozen powers, except floating mutual pairs whose two links both stay in
/// their users' waterfilling sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Free,
    Sole { user: usize, rrh: usize },
    SingleSic { k1: usize, k2: usize, rrh: usize, p1_w: f64, p2_w: f64 },
    MutualSic { k1: usize, r1: usize, k2: usize, r2: usize, p1_w: f64, p2_w: f64 },
    FloatingMutual { k1: usize, r1: usize, k2: usize, r2: usize },
}

/// A subcarrier's final use with explicit powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubcarrierUse {
    Unused,
    Sole { user: usize, rrh: usize, power_w: f64 },
    SingleSic { k1: usize, k2: usize, rrh: usize, p1_w: f64, p2_w: f64 },
    MutualSic { k1: usize, r1: usize, k2: usize, r2: usize, p1_w: f64, p2_w: f64 },
}

impl SubcarrierUse {
    pub fn total_power(&self) -> f64 {
        match *self {
            SubcarrierUse::Unused => 0.0,
            SubcarrierUse::Sole { power_w, .. } => power_w,
            SubcarrierUse::SingleSic { p1_w, p2_w, .. } | SubcarrierUse::MutualSic { p1_w, p2_w, .. } => p1_w + p2_w,
        }
    }

    /// `(user, rrh, power)` for every user transmitting on this subcarrier.
    pub fn links(&self) -> Vec<(usize, usize, f64)> {
        match *self {
            SubcarrierUse::Unused => vec![],
            SubcarrierUse::Sole { user, rrh, power_w } => vec![(user, rrh, power_w)],
            SubcarrierUse::SingleSic { k1, k2, rrh, p1_w, p2_w } => vec![(k1, rrh, p1_w), (k2, rrh, p2_w)],
            SubcarrierUse::MutualSic { k1, r1, k2, r2, p1_w, p2_w } => vec![(k1, r1, p1_w), (k2, r2, p2_w)],
        }
    }

    /// Rates `(user, bps)` delivered on subcarrier `n`.
    pub fn rates(&self, channel: &ChannelTensor, n: usize) -> Vec<(usize, f64)> {
        let s2 = channel.noise_power_w;
        let bs = channel.b_over_s();
        match *self {
            SubcarrierUse::Unused => vec![],
            SubcarrierUse::Sole { user, rrh, power_w } => {
                vec![(user, shannon(power_w * channel.gain(user, n, rrh) / s2, bs))]
            }
            SubcarrierUse::SingleSic { k1, k2, rrh, p1_w, p2_w } => {
                let g2 = channel.gain(k2, n, rrh);
                vec![
                    (k1, shannon(p1_w * channel.gain(k1, n, rrh) / s2, bs)),
                    (k2, shannon(p2_w * g2 / (p1_w * g2 + s2), bs)),
                ]
            }
            SubcarrierUse::MutualSic { k1, r1, k2, r2, p1_w, p2_w } => vec![
                (k1, shannon(p1_w * channel.gain(k1, n, r1) / s2, bs)),
                (k2, shannon(p2_w * channel.gain(k2, n, r2) / s2, bs)),
            ],
        }
    }
}

/// Per-user rate totals of a snapshot.
pub fn user_rates(uses: &[SubcarrierUse], channel: &ChannelTensor) -> Vec<f64> {
    let mut out = vec![0.0; channel.num_users()];
    for (n, u) in uses.iter().enumerate() {
        for (k, r) in u.rates(channel, n) {
            out[k] += r;
        }
    }
    out
}

/// Per-user power totals of a snapshot.
pub fn user_powers(uses: &[SubcarrierUse], num_users: usize) -> Vec<f64> {
    let mut out = vec![0.0; num_users];
    for u in uses {
        for (k, _, p) in u.links() {
            out[k] += p;
        }
    }
    out
}

/// Dense `[user][subcarrier][rrh]` power array.
pub fn power_tensor(uses: &[SubcarrierUse], num_users: usize, num_rrhs: usize) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![vec![vec![0.0; num_rrhs]; uses.len()]; num_users];
    for (n, u) in uses.iter().enumerate() {
        for (k, r, p) in u.links() {
            out[k][n][r] = p;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    WorstBestH,
    Oma,
    SingleSic,
    MutualSic,
}

/// One accepted assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceStep {
    pub phase: Phase,
    pub user: usize,
    pub subcarrier: usize,
    pub predicted_delta_w: f64,
    pub total_before_w: f64,
    pub total_after_w: f64,
}

/// Iteration count of one phase run next to its theoretical bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PhaseRun {
    pub phase: Phase,
    pub iterations: usize,
    pub bound: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub runs: Vec<PhaseRun>,
}

/// A pair whose powers no longer change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenPair {
    pub subcarrier: usize,
    pub k1: usize,
    pub r1: usize,
    pub k2: usize,
    pub r2: usize,
    pub p1_w: f64,
    pub p2_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    pub slots: Vec<Slot>,
    pub water: Vec<UserWaterState>,
    pub active: Vec<bool>,
    pub demands_bps: Vec<f64>,
    pub sigma2: f64,
    pub b_over_s: f64,
    pub trace: Trace,
}

impl AllocationState {
    pub fn new(channel: &ChannelTensor, demands_bps: &[f64]) -> Result<Self> {
        let k = channel.num_users();
        if demands_bps.len() != k {
            return Err(invalid(format!("{} demands for {k} users", demands_bps.len())));
        }
        if k > channel.num_subcarriers() {
            return Err(invalid("more users than subcarriers"));
        }
        if demands_bps.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(invalid("rate demands must be positive"));
        }
        Ok(Self {
            slots: vec![Slot::Free; channel.num_subcarriers()],
            water: vec![UserWaterState::default(); k],
            active: vec![true; k],
            demands_bps: demands_bps.to_vec(),
            sigma2: channel.noise_power_w,
            b_over_s: channel.b_over_s(),
            trace: Trace::default(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.water.len()
    }

    /// Unallocated subcarriers.
    pub fn free_subcarriers(&self) -> BTreeSet<usize> {
        self.indices(|s| matches!(s, Slot::Free))
    }

    /// Subcarriers with a first user and no second.
    pub fn first_only(&self) -> BTreeSet<usize> {
        self.indices(|s| matches!(s, Slot::Sole { .. }))
    }

    pub fn mutual_set(&self) -> BTreeSet<usize> {
        self.indices(|s| matches!(s, Slot::MutualSic { .. } | Slot::FloatingMutual { .. }))
    }

    pub fn active_users(&self) -> BTreeSet<usize> {
        (0..self.num_users()).filter(|k| self.active[*k]).collect()
    }

    fn indices(&self, pred: impl Fn(&Slot) -> bool) -> BTreeSet<usize> {
        self.slots.iter().enumerate().filter(|(_, s)| pred(s)).map(|(n, _)| n).collect()
    }

    pub fn frozen_pairs(&self) -> Vec<FrozenPair> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(n, s)| match *s {
                Slot::SingleSic { k1, k2, rrh, p1_w, p2_w } => {
                    Some(FrozenPair { subcarrier: n, k1, r1: rrh, k2, r2: rrh, p1_w, p2_w })
                }
                Slot::MutualSic { k1, r1, k2, r2, p1_w, p2_w } => {
                    Some(FrozenPair { subcarrier: n, k1, r1, k2, r2, p1_w, p2_w })
                }
                _ => None,
            })
            .collect()
    }

    /// `(subcarrier, rrh)` links of user `k` in subcarrier order.
    pub fn assigned(&self, k: usize) -> Vec<(usize, usize)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(n, s)| match *s {
                Slot::Sole { user, rrh } if user == k => Some((n, rrh)),
                Slot::SingleSic { k1, k2, rrh, .. } if k1 == k || k2 == k => Some((n, rrh)),
                Slot::MutualSic { k1, r1, .. } | Slot::FloatingMutual { k1, r1, .. } if k1 == k => Some((n, r1)),
                Slot::MutualSic { k2, r2, .. } | Slot::FloatingMutual { k2, r2, .. } if k2 == k => Some((n, r2)),
                _ => None,
            })
            .collect()
    }

    /// Power user `k` spends on frozen pairs.
    pub fn frozen_power(&self, k: usize) -> f64 {
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::SingleSic { k1, k2, p1_w, p2_w, .. } | Slot::MutualSic { k1, k2, p1_w, p2_w, .. } => {
                    (if k1 == k { p1_w } else { 0.0 }) + (if k2 == k { p2_w } else { 0.0 })
                }
                _ => 0.0,
            })
            .sum()
    }

    pub fn user_power(&self, k: usize) -> f64 {
        self.water[k].sole_power(self.sigma2) + self.frozen_power(k)
    }

    pub fn total_power(&self) -> f64 {
        (0..self.num_users()).map(|k| self.user_power(k)).sum()
    }

    /// Active user with the largest total power, lowest index on ties.
    pub fn most_power_consuming(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.num_users() {
            if !self.active[k] {
                continue;
            }
            let p = self.user_power(k);
            if best.map_or(true, |(_, bp)| p > bp) {
                best = Some((k, p));
            }
        }
        best.map(|(k, _)| k)
    }

    pub fn reset_active(&mut self) {
        self.active.iter_mut().for_each(|a| *a = true);
    }

    /// Gives free subcarrier `n` to user `k` as a sole link and sets the new waterline.
    pub(crate) fn add_sole(&mut self, k: usize, n: usize, rrh: usize, gain: f64, waterline_w: f64) {
        debug_assert!(matches!(self.slots[n], Slot::Free));
        self.slots[n] = Slot::Sole { user: k, rrh };
        let w = &mut self.water[k];
        w.sole.push(SoleLink { subcarrier: n, rrh, gain });
        w.waterline_w = waterline_w;
    }

    /// Removes `n` from its owner's sole set and returns `(owner, rrh, gain, power)`.
    pub(crate) fn take_sole(&mut self, n: usize) -> Option<(usize, SoleLink, f64)> {
        let Slot::Sole { user, .. } = self.slots[n] else { return None };
        let w = &mut self.water[user];
        let pos = w.position(n)?;
        let power = w.power_on(&w.sole[pos], self.sigma2);
        let link = w.sole.remove(pos);
        Some((user, link, power))
    }

    /// Floor of user `k`'s sole set without subcarrier `n`.
    pub fn floor_without(&self, k: usize, n: usize) -> f64 {
        self.water[k]
            .sole
            .iter()
            .filter(|l| l.subcarrier != n)
            .map(|l| self.sigma2 / l.gain)
            .fold(0.0, f64::max)
    }

    /// Explicit-power view of the current allocation.
    pub fn snapshot(&self) -> Vec<SubcarrierUse> {
        self.slots
            .iter()
            .enumerate()
            .map(|(n, s)| match *s {
                Slot::Free => SubcarrierUse::Unused,
                Slot::Sole { user, rrh } => SubcarrierUse::Sole { user, rrh, power_w: self.floating_power(user, n) },
                Slot::SingleSic { k1, k2, rrh, p1_w, p2_w } => SubcarrierUse::SingleSic { k1, k2, rrh, p1_w, p2_w },
                Slot::MutualSic { k1, r1, k2, r2, p1_w, p2_w } => {
                    SubcarrierUse::MutualSic { k1, r1, k2, r2, p1_w, p2_w }
                }
                Slot::FloatingMutual { k1, r1, k2, r2 } => SubcarrierUse::MutualSic {
                    k1,
                    r1,
                    k2,
                    r2,
                    p1_w: self.floating_power(k1, n),
                    p2_w: self.floating_power(k2, n),
                },
            })
            .collect()
    }

    fn floating_power(&self, k: usize, n: usize) -> f64 {
        let w = &self.water[k];
        w.position(n).map_or(0.0, |i| w.power_on(&w.sole[i], self.sigma2))
    }
}
