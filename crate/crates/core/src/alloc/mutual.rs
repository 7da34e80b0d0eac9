//! Pairing on subcarriers served by two different RRHs with mutual SIC.

use super::phases::record;
use super::state::{AllocationState, Phase, PhaseRun, Slot};
use super::AlgorithmConfig;
use crate::mutual_sic::{
    delta_second, dpa_adjust, mutual_sic_feasible, opad_optimize, power_window, rate_condition_terms,
    waterfill_second_power, OpadInput, PairGains,
};
use crate::scenario::ChannelTensor;
use crate::waterfill::{
    admits_waterline_decrease, delta_power_oma, shannon, waterline_add, waterline_rate_shift, SoleLink,
};

/// How the pair's powers are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutualMode {
    /// Window ignored; both links keep floating with their users' waterlines.
    Uc,
    /// Waterfilling clamped into the window.
    Dpa,
    /// Joint adjustment of both powers for every candidate.
    Opad,
    /// Clamped selection, joint adjustment of the winner.
    Sopad,
}

#[derive(Debug, Clone, Copy)]
struct MutualCandidate {
    n: usize,
    k1: usize,
    r1: usize,
    r2: usize,
    gains: PairGains,
    p1: f64,
    p2: f64,
    delta: f64,
}

/// Checks both exact SIC rate conditions with a relative tolerance.
pub fn exact_conditions_hold(gains: &PairGains, p1_w: f64, p2_w: f64, sigma2: f64) -> bool {
    let (a, b) = rate_condition_terms(gains, p1_w, p2_w, sigma2);
    let scale = p1_w * p2_w * (gains.g12 * gains.g21 + gains.g22 * gains.g11)
        + sigma2 * (p1_w + p2_w) * (gains.g11 + gains.g12 + gains.g21 + gains.g22);
    a >= -1e-9 * scale && b >= -1e-9 * scale
}

pub fn mutual_sic_pairing(state: &mut AllocationState, channel: &ChannelTensor, config: &AlgorithmConfig, mode: MutualMode) {
    state.reset_active();
    let bound = state.first_only().len() + state.num_users();
    let mut iterations = 0;
    while !state.first_only().is_empty() {
        let Some(k2) = state.most_power_consuming() else { break };
        iterations += 1;
        let chosen = select(state, channel, config, mode, k2);
        match chosen {
            Some(c) if c.delta < -config.rho_w && mode == MutualMode::Uc => apply_floating(state, k2, &c),
            Some(c) if c.delta < -config.rho_w => apply(state, k2, &c),
            _ => state.active[k2] = false,
        }
    }
    state.trace.runs.push(PhaseRun { phase: Phase::MutualSic, iterations, bound });
}

fn select(
    state: &AllocationState,
    channel: &ChannelTensor,
    config: &AlgorithmConfig,
    mode: MutualMode,
    k2: usize,
) -> Option<MutualCandidate> {
    let eval_mode = if mode == MutualMode::Sopad { MutualMode::Dpa } else { mode };
    let mut best: Option<MutualCandidate> = None;
    for c in candidates(state, channel, k2) {
        if let Some(c) = evaluate(state, config, eval_mode, k2, c) {
            if best.map_or(true, |b| c.delta < b.delta) {
                best = Some(c);
            }
        }
    }
    if mode != MutualMode::Sopad {
        return best;
    }
    let dpa = best?;
    if dpa.delta >= -config.rho_w {
        return Some(dpa);
    }
    match evaluate(state, config, MutualMode::Opad, k2, dpa) {
        Some(opt) if opt.delta <= dpa.delta => Some(opt),
        _ => Some(dpa),
    }
}

/// Candidate `(n, r2)` links passing the cross-gain test and the waterline test.
fn candidates(state: &AllocationState, channel: &ChannelTensor, k2: usize) -> Vec<MutualCandidate> {
    let water2 = &state.water[k2];
    if water2.sole_count() == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (n, slot) in state.slots.iter().enumerate() {
        let Slot::Sole { user: k1, rrh: r1 } = *slot else { continue };
        if k1 == k2 {
            continue;
        }
        for r2 in (0..channel.num_rrhs()).filter(|r| *r != r1) {
            let gains = PairGains::new(
                channel.gain(k1, n, r1),
                channel.gain(k1, n, r2),
                channel.gain(k2, n, r1),
                channel.gain(k2, n, r2),
            );
            if mutual_sic_feasible(&gains) && admits_waterline_decrease(gains.g22, water2.waterline_w, state.sigma2) {
                out.push(MutualCandidate { n, k1, r1, r2, gains, p1: 0.0, p2: 0.0, delta: f64::INFINITY });
            }
        }
    }
    out
}

fn evaluate(
    state: &AllocationState,
    config: &AlgorithmConfig,
    mode: MutualMode,
    k2: usize,
    mut c: MutualCandidate,
) -> Option<MutualCandidate> {
    let s2 = state.sigma2;
    let water1 = &state.water[c.k1];
    let water2 = &state.water[k2];
    let n2 = water2.sole_count();
    let floor2 = water2.floor(s2);
    let pos = water1.position(c.n)?;
    let p1 = water1.power_on(&water1.sole[pos], s2);
    let g = c.gains;
    let wf = waterfill_second_power(water2.waterline_w, g.g22, s2, n2);

    let (p1, p2, delta) = match mode {
        MutualMode::Uc => {
            let w_new = waterline_add(water2.waterline_w, n2, g.g22, s2);
            (p1, w_new - s2 / g.g22, delta_power_oma(water2.waterline_w, w_new, n2, g.g22, s2))
        }
        MutualMode::Dpa | MutualMode::Sopad => {
            let (lo, hi) = power_window(&g, p1);
            if (1.0 + config.mu) * lo > (1.0 - config.mu) * hi {
                return None;
            }
            let p2 = dpa_adjust(wf, &g, p1, config.mu);
            (p1, p2, delta_second(water2.waterline_w, p2, g.g22, s2, n2))
        }
        MutualMode::Opad => {
            let input = OpadInput {
                sigma2: s2,
                n_sole_1: water1.sole_count(),
                n_sole_2: n2,
                mu: config.mu,
                initial_p1_w: p1,
                waterline1_w: water1.waterline_w,
                waterline2_w: water2.waterline_w,
                floor1_w: state.floor_without(c.k1, c.n),
                floor2_w: floor2,
            };
            let sol = opad_optimize(&g, &input).ok()?;
            (sol.p1_w, sol.p2_w, sol.total_delta_w())
        }
    };
    if !(p2 > 0.0 && p1 > 0.0 && delta.is_finite()) {
        return None;
    }
    let w2 = water2.waterline_w * (-(p2 * g.g22 / s2).ln_1p() / n2 as f64).exp();
    if w2 < floor2 * (1.0 - 1e-12) {
        return None;
    }
    if mode != MutualMode::Uc && !exact_conditions_hold(&g, p1, p2, s2) {
        return None;
    }
    c.p1 = p1;
    c.p2 = p2;
    c.delta = delta;
    Some(c)
}

fn apply_floating(state: &mut AllocationState, k2: usize, c: &MutualCandidate) {
    let before = state.total_power();
    let Slot::Sole { user: k1, .. } = state.slots[c.n] else { return };
    let w2 = &mut state.water[k2];
    w2.waterline_w = waterline_add(w2.waterline_w, w2.sole_count(), c.gains.g22, state.sigma2);
    w2.sole.push(SoleLink { subcarrier: c.n, rrh: c.r2, gain: c.gains.g22 });
    state.slots[c.n] = Slot::FloatingMutual { k1, r1: c.r1, k2, r2: c.r2 };
    record(state, Phase::MutualSic, k2, c.n, c.delta, before);
}

fn apply(state: &mut AllocationState, k2: usize, c: &MutualCandidate) {
    let s2 = state.sigma2;
    let bs = state.b_over_s;
    let before = state.total_power();
    let Some((k1, _, p1_initial)) = state.take_sole(c.n) else { return };
    if (c.p1 - p1_initial).abs() > 0.0 && state.water[k1].sole_count() > 0 {
        let delta_rate = shannon(c.p1 * c.gains.g11 / s2, bs) - shannon(p1_initial * c.gains.g11 / s2, bs);
        let w1 = &state.water[k1];
        let floor1 = w1.floor(s2);
        // The candidate was screened against this floor, so the shift cannot fail.
        if let Ok(w) = waterline_rate_shift(w1.waterline_w, -delta_rate, w1.sole_count(), bs, floor1) {
            state.water[k1].waterline_w = w;
        }
    }
    let n2 = state.water[k2].sole_count() as f64;
    let w2 = &mut state.water[k2];
    w2.waterline_w *= (-(c.p2 * c.gains.g22 / s2).ln_1p() / n2).exp();
    state.slots[c.n] = Slot::MutualSic { k1, r1: c.r1, k2, r2: c.r2, p1_w: c.p1, p2_w: c.p2 };
    record(state, Phase::MutualSic, k2, c.n, c.delta, before);
}
