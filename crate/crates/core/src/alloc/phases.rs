//! Worst-Best-H start, OMA growth, and same-RRH single-SIC pairing.

use super::state::{AllocationState, Phase, PhaseRun, Slot, TraceStep};
use super::AlgorithmConfig;
use crate::scenario::ChannelTensor;
use crate::waterfill::{
    admits_waterline_decrease, delta_power_oma, delta_power_noma, ftpa_power, lpo_power, power_for_rate,
    shifted_waterline_second, waterline_add,
};

/// Power rule for the second user on a same-RRH pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingPower {
    Ftpa,
    Lpo,
}

/// Strongest free link of user `k` as `(n, r, gain)`, lowest `(n, r)` on ties.
pub(crate) fn best_free_link(state: &AllocationState, channel: &ChannelTensor, k: usize) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (n, slot) in state.slots.iter().enumerate() {
        if !matches!(slot, Slot::Free) {
            continue;
        }
        for r in 0..channel.num_rrhs() {
            let g = channel.gain(k, n, r);
            if best.map_or(true, |(_, _, bg)| g > bg) {
                best = Some((n, r, g));
            }
        }
    }
    best
}

pub(crate) fn record(state: &mut AllocationState, phase: Phase, user: usize, subcarrier: usize, predicted: f64, before: f64) {
    let after = state.total_power();
    state.trace.steps.push(TraceStep {
        phase,
        user,
        subcarrier,
        predicted_delta_w: predicted,
        total_before_w: before,
        total_after_w: after,
    });
}

/// Gives every user one link, serving first the user whose best link is weakest.
pub fn worst_best_h(state: &mut AllocationState, channel: &ChannelTensor) {
    let k_count = state.num_users();
    let mut served = vec![false; k_count];
    for _ in 0..k_count {
        let mut pick: Option<(usize, usize, usize, f64)> = None;
        for k in (0..k_count).filter(|k| !served[*k]) {
            if let Some((n, r, g)) = best_free_link(state, channel, k) {
                if pick.map_or(true, |(_, _, _, pg)| g < pg) {
                    pick = Some((k, n, r, g));
                }
            }
        }
        let Some((k, n, r, g)) = pick else { break };
        let before = state.total_power();
        let p = power_for_rate(state.demands_bps[k], g, state.sigma2, state.b_over_s);
        state.add_sole(k, n, r, g, p + state.sigma2 / g);
        served[k] = true;
        record(state, Phase::WorstBestH, k, n, p, before);
    }
    state.trace.runs.push(PhaseRun { phase: Phase::WorstBestH, iterations: k_count, bound: k_count });
}

/// Adds sole links to the most power-consuming user while each one saves more than `rho`.
pub fn oma_phase(state: &mut AllocationState, channel: &ChannelTensor, config: &AlgorithmConfig) {
    state.reset_active();
    let bound = state.free_subcarriers().len() + state.num_users();
    let mut iterations = 0;
    while !state.free_subcarriers().is_empty() {
        let Some(k) = state.most_power_consuming() else { break };
        iterations += 1;
        let w = state.water[k].waterline_w;
        let candidate = best_free_link(state, channel, k)
            .filter(|&(_, _, g)| admits_waterline_decrease(g, w, state.sigma2));
        let Some((n, r, g)) = candidate else {
            state.active[k] = false;
            continue;
        };
        let n_old = state.water[k].sole_count();
        let w_new = waterline_add(w, n_old, g, state.sigma2);
        let delta = delta_power_oma(w, w_new, n_old, g, state.sigma2);
        if delta < -config.rho_w {
            let before = state.total_power();
            state.add_sole(k, n, r, g, w_new);
            record(state, Phase::Oma, k, n, delta, before);
        } else {
            state.active[k] = false;
        }
    }
    state.trace.runs.push(PhaseRun { phase: Phase::Oma, iterations, bound });
}

struct SingleCandidate {
    n: usize,
    k1: usize,
    rrh: usize,
    p1: f64,
    p2: f64,
    waterline: f64,
    delta: f64,
}

/// Adds a second user on the first user's RRH to subcarriers carrying one user.
pub fn single_sic_pairing(state: &mut AllocationState, channel: &ChannelTensor, config: &AlgorithmConfig, mode: PairingPower) {
    state.reset_active();
    let bound = state.first_only().len() + state.num_users();
    let mut iterations = 0;
    while !state.first_only().is_empty() {
        let Some(k2) = state.most_power_consuming() else { break };
        iterations += 1;
        match best_single_candidate(state, channel, config, mode, k2) {
            Some(c) if c.delta < -config.rho_w => {
                let before = state.total_power();
                state.take_sole(c.n);
                state.slots[c.n] = Slot::SingleSic { k1: c.k1, k2, rrh: c.rrh, p1_w: c.p1, p2_w: c.p2 };
                state.water[k2].waterline_w = c.waterline;
                record(state, Phase::SingleSic, k2, c.n, c.delta, before);
            }
            _ => state.active[k2] = false,
        }
    }
    state.trace.runs.push(PhaseRun { phase: Phase::SingleSic, iterations, bound });
}

fn best_single_candidate(
    state: &AllocationState,
    channel: &ChannelTensor,
    config: &AlgorithmConfig,
    mode: PairingPower,
    k2: usize,
) -> Option<SingleCandidate> {
    let water2 = &state.water[k2];
    let n_sole = water2.sole_count();
    if n_sole == 0 {
        return None;
    }
    let s2 = state.sigma2;
    let floor2 = water2.floor(s2);
    let mut best: Option<SingleCandidate> = None;
    for (n, slot) in state.slots.iter().enumerate() {
        let Slot::Sole { user: k1, rrh } = *slot else { continue };
        if k1 == k2 {
            continue;
        }
        let g1 = channel.gain(k1, n, rrh);
        let g2 = channel.gain(k2, n, rrh);
        if !(g2 < g1) {
            continue;
        }
        let water1 = &state.water[k1];
        let Some(pos) = water1.position(n) else { continue };
        let p1 = water1.power_on(&water1.sole[pos], s2);
        let p2 = match mode {
            PairingPower::Ftpa => ftpa_power(p1, g1, g2, config.alpha),
            PairingPower::Lpo => match lpo_power(water2.waterline_w, p1, g2, s2, n_sole, config.mu) {
                Ok(p) => p,
                Err(_) => continue,
            },
        };
        if !(p2 > 0.0) {
            continue;
        }
        let w_new = shifted_waterline_second(water2.waterline_w, p2, p1, g2, s2, n_sole);
        if w_new < floor2 * (1.0 - 1e-12) {
            continue;
        }
        let delta = delta_power_noma(water2.waterline_w, w_new, n_sole, p2);
        if best.as_ref().map_or(true, |b| delta < b.delta) {
            best = Some(SingleCandidate { n, k1, rrh, p1, p2, waterline: w_new, delta });
        }
    }
    best
}
