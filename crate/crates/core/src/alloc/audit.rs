//! Post-hoc checks of an allocation's constraints and of the greedy descent.

use std::fmt;

use super::mutual::exact_conditions_hold;
use super::state::{user_rates, Phase, SubcarrierUse};
use super::{effective_channel, Algorithm, AlgorithmConfig, AllocationResult};
use crate::mutual_sic::{within_window, PairGains};
use crate::scenario::ChannelTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NegativePower,
    RateMismatch,
    PairOrder,
    MutualWindow,
    MutualRateCondition,
    DescentStep,
    IterationBound,
    SameUserTwice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

/// Relative tolerance on recomputed user rates.
pub const RATE_TOL: f64 = 1e-6;

/// Checks every constraint and trace property of a finished allocation.
pub fn audit_allocation(
    result: &AllocationResult,
    channel: &ChannelTensor,
    demands_bps: &[f64],
    config: &AlgorithmConfig,
) -> Vec<Violation> {
    let ch = effective_channel(channel, result.algorithm);
    let s2 = ch.noise_power_w;
    let mut out = Vec::new();
    let mut push = |kind, detail: String| out.push(Violation { kind, detail });
    let constrained = result.algorithm != Algorithm::MutSicUc;

    for (n, u) in result.uses.iter().enumerate() {
        for (k, r, p) in u.links() {
            if !(p >= 0.0) {
                push(ViolationKind::NegativePower, format!("user {k} subcarrier {n} rrh {r}: {p}"));
            }
        }
        match *u {
            SubcarrierUse::SingleSic { k1, k2, p1_w, p2_w, .. } => {
                if k1 == k2 {
                    push(ViolationKind::SameUserTwice, format!("subcarrier {n}"));
                }
                if p2_w < p1_w * (1.0 - 1e-9) {
                    push(ViolationKind::PairOrder, format!("subcarrier {n}: p2 {p2_w} < p1 {p1_w}"));
                }
            }
            SubcarrierUse::MutualSic { k1, r1, k2, r2, p1_w, p2_w } => {
                if k1 == k2 || r1 == r2 {
                    push(ViolationKind::SameUserTwice, format!("subcarrier {n}"));
                }
                if constrained {
                    let g = PairGains::new(ch.gain(k1, n, r1), ch.gain(k1, n, r2), ch.gain(k2, n, r1), ch.gain(k2, n, r2));
                    if !within_window(&g, p1_w, p2_w, 1e-9) {
                        push(ViolationKind::MutualWindow, format!("subcarrier {n}: ({p1_w}, {p2_w})"));
                    }
                    if !exact_conditions_hold(&g, p1_w, p2_w, s2) {
                        push(ViolationKind::MutualRateCondition, format!("subcarrier {n}"));
                    }
                }
            }
            _ => {}
        }
    }

    for (k, (rate, demand)) in user_rates(&result.uses, &ch).iter().zip(demands_bps).enumerate() {
        if ((rate - demand) / demand).abs() > RATE_TOL {
            push(ViolationKind::RateMismatch, format!("user {k}: {rate} vs {demand}"));
        }
    }

    for step in &result.trace.steps {
        if step.phase == Phase::WorstBestH {
            continue;
        }
        let actual = step.total_after_w - step.total_before_w;
        let slack = 1e-9 * step.total_before_w.abs();
        if !(actual < -config.rho_w + slack) {
            push(
                ViolationKind::DescentStep,
                format!("{:?} user {} subcarrier {}: change {actual}", step.phase, step.user, step.subcarrier),
            );
        }
    }
    for run in &result.trace.runs {
        if run.iterations > run.bound {
            push(ViolationKind::IterationBound, format!("{:?}: {} > {}", run.phase, run.iterations, run.bound));
        }
    }
    out
}
