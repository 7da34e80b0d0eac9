//! Optimal power allocation for a fixed assignment.
//!
//! Each link carries a rate variable `x` in nats per subcarrier. Powers follow
//! from rates: `(e^x - 1) sigma2 / g` on a sole or mutual-SIC link, and for a
//! same-RRH pair `p1 = (e^x1 - 1) sigma2 / h1`, `p2 = (e^x2 - 1)(p1 + sigma2 / h2)`.
//! The KKT conditions of "minimize total power subject to per-user rate sums"
//! are solved with Newton's method inside an active-set loop that handles
//! `x >= 0`, `p2 >= p1` on same-RRH pairs and, for the constrained oracle, the
//! mutual-SIC power window.

use std::f64::consts::LN_2;

use super::state::SubcarrierUse;
use crate::error::{invalid, Error, Result};
use crate::scenario::ChannelTensor;
use crate::solver::solve_system;

const ACTIVE_TOL: f64 = 1e-9;
const KKT_ACCEPT: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
enum Block {
    Sole { n: usize, user: usize, rrh: usize, h: f64, v: usize },
    Single { n: usize, k1: usize, k2: usize, rrh: usize, h1: f64, h2: f64, v1: usize, v2: usize },
    Mutual { n: usize, k1: usize, r1: usize, k2: usize, r2: usize, g11: f64, g22: f64, lo: f64, hi: f64, v1: usize, v2: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Constraint {
    RateNonneg(usize),
    SingleOrder(usize),
    WindowLow(usize),
    WindowHigh(usize),
}

struct Problem {
    blocks: Vec<Block>,
    owner: Vec<usize>,
    demand_nats: Vec<f64>,
    sigma2: f64,
    num_subcarriers: usize,
    /// Per-user power scale used to normalize stationarity rows.
    scale: Vec<f64>,
}

/// Outcome of a KKT solve for one active set.
#[derive(Debug, Clone, PartialEq)]
pub struct PaSolution {
    pub uses: Vec<SubcarrierUse>,
    pub total_power_w: f64,
    /// Max-norm of the normalized KKT residual at the returned point.
    pub kkt_residual: f64,
    pub newton_iterations: usize,
    pub active_constraints: usize,
}

/// Result of [`optimal_power_allocation`], which never fails on valid input.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPaOutcome {
    pub uses: Vec<SubcarrierUse>,
    pub total_power_w: f64,
    pub input_total_w: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    /// True when the input powers were returned unchanged.
    pub fallback: bool,
}

impl Problem {
    fn build(uses: &[SubcarrierUse], channel: &ChannelTensor, demands_bps: &[f64]) -> Result<(Self, Vec<f64>)> {
        if uses.len() != channel.num_subcarriers() || demands_bps.len() != channel.num_users() {
            return Err(invalid("assignment does not match the channel dimensions"));
        }
        let s2 = channel.noise_power_w;
        let mut blocks = Vec::new();
        let mut owner = Vec::new();
        let mut x0 = Vec::new();
        let mut push = |user: usize, x: f64, owner: &mut Vec<usize>| {
            owner.push(user);
            x0.push(x);
            owner.len() - 1
        };
        for (n, u) in uses.iter().enumerate() {
            match *u {
                SubcarrierUse::Unused => {}
                SubcarrierUse::Sole { user, rrh, power_w } => {
                    let h = channel.gain(user, n, rrh);
                    let v = push(user, (power_w.max(0.0) * h / s2).ln_1p(), &mut owner);
                    blocks.push(Block::Sole { n, user, rrh, h, v });
                }
                SubcarrierUse::SingleSic { k1, k2, rrh, p1_w, p2_w } => {
                    let h1 = channel.gain(k1, n, rrh);
                    let h2 = channel.gain(k2, n, rrh);
                    let v1 = push(k1, (p1_w.max(0.0) * h1 / s2).ln_1p(), &mut owner);
                    let v2 = push(k2, (p2_w.max(0.0) * h2 / (p1_w.max(0.0) * h2 + s2)).ln_1p(), &mut owner);
                    blocks.push(Block::Single { n, k1, k2, rrh, h1, h2, v1, v2 });
                }
                SubcarrierUse::MutualSic { k1, r1, k2, r2, p1_w, p2_w } => {
                    let g11 = channel.gain(k1, n, r1);
                    let g22 = channel.gain(k2, n, r2);
                    let lo = g11 / channel.gain(k1, n, r2);
                    let hi = channel.gain(k2, n, r1) / g22;
                    let v1 = push(k1, (p1_w.max(0.0) * g11 / s2).ln_1p(), &mut owner);
                    let v2 = push(k2, (p2_w.max(0.0) * g22 / s2).ln_1p(), &mut owner);
                    blocks.push(Block::Mutual { n, k1, r1, k2, r2, g11, g22, lo, hi, v1, v2 });
                }
            }
        }
        let k_count = channel.num_users();
        if (0..k_count).any(|k| !owner.contains(&k)) {
            return Err(invalid("every user needs at least one link"));
        }
        let demand_nats = demands_bps.iter().map(|d| d * LN_2 / channel.b_over_s()).collect();
        let mut p = Self {
            blocks,
            owner,
            demand_nats,
            sigma2: s2,
            num_subcarriers: channel.num_subcarriers(),
            scale: vec![1.0; k_count],
        };
        let grad = p.gradient(&x0);
        let mut sum = vec![0.0; k_count];
        let mut cnt = vec![0usize; k_count];
        for (i, g) in grad.iter().enumerate() {
            sum[p.owner[i]] += g;
            cnt[p.owner[i]] += 1;
        }
        p.scale = sum.iter().zip(&cnt).map(|(s, c)| (s / *c as f64).max(f64::MIN_POSITIVE)).collect();
        Ok((p, x0))
    }

    fn num_vars(&self) -> usize {
        self.owner.len()
    }

    /// Per-block `(p1, p2)` (p2 = 0 for sole links).
    fn powers(&self, x: &[f64]) -> Vec<(f64, f64)> {
        let s2 = self.sigma2;
        self.blocks
            .iter()
            .map(|b| match *b {
                Block::Sole { h, v, .. } => (x[v].exp_m1() * s2 / h, 0.0),
                Block::Single { h1, h2, v1, v2, .. } => {
                    let p1 = x[v1].exp_m1() * s2 / h1;
                    (p1, x[v2].exp_m1() * (p1 + s2 / h2))
                }
                Block::Mutual { g11, g22, v1, v2, .. } => (x[v1].exp_m1() * s2 / g11, x[v2].exp_m1() * s2 / g22),
            })
            .collect()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s2 = self.sigma2;
        let mut g = vec![0.0; self.num_vars()];
        for b in &self.blocks {
            match *b {
                Block::Sole { h, v, .. } => g[v] = x[v].exp() * s2 / h,
                Block::Single { h1, h2, v1, v2, .. } => {
                    let p1 = x[v1].exp_m1() * s2 / h1;
                    g[v1] = x[v2].exp() * x[v1].exp() * s2 / h1;
                    g[v2] = x[v2].exp() * (p1 + s2 / h2);
                }
                Block::Mutual { g11, g22, v1, v2, .. } => {
                    g[v1] = x[v1].exp() * s2 / g11;
                    g[v2] = x[v2].exp() * s2 / g22;
                }
            }
        }
        g
    }

    /// Power scale of a constraint's row and of its multiplier.
    fn constraint_scale(&self, c: Constraint) -> (f64, f64) {
        match c {
            Constraint::RateNonneg(i) => (1.0, self.scale[self.owner[i]]),
            Constraint::SingleOrder(b) | Constraint::WindowLow(b) | Constraint::WindowHigh(b) => {
                let k2 = match self.blocks[b] {
                    Block::Single { k2, .. } | Block::Mutual { k2, .. } => k2,
                    Block::Sole { user, .. } => user,
                };
                (self.scale[k2], 1.0)
            }
        }
    }

    /// Value `c(x) >= 0` and sparse gradient of a constraint.
    fn constraint(&self, c: Constraint, x: &[f64]) -> (f64, Vec<(usize, f64)>) {
        let s2 = self.sigma2;
        match c {
            Constraint::RateNonneg(i) => (x[i], vec![(i, 1.0)]),
            Constraint::SingleOrder(b) => {
                let Block::Single { h1, h2, v1, v2, .. } = self.blocks[b] else { unreachable!() };
                let p1 = x[v1].exp_m1() * s2 / h1;
                let p2 = x[v2].exp_m1() * (p1 + s2 / h2);
                let dp1 = x[v1].exp() * s2 / h1;
                (p2 - p1, vec![(v1, (x[v2].exp() - 2.0) * dp1), (v2, x[v2].exp() * (p1 + s2 / h2))])
            }
            Constraint::WindowLow(b) | Constraint::WindowHigh(b) => {
                let Block::Mutual { g11, g22, lo, hi, v1, v2, .. } = self.blocks[b] else { unreachable!() };
                let p1 = x[v1].exp_m1() * s2 / g11;
                let p2 = x[v2].exp_m1() * s2 / g22;
                let dp1 = x[v1].exp() * s2 / g11;
                let dp2 = x[v2].exp() * s2 / g22;
                if matches!(c, Constraint::WindowLow(_)) {
                    (p2 - lo * p1, vec![(v1, -lo * dp1), (v2, dp2)])
                } else {
                    (hi * p1 - p2, vec![(v1, hi * dp1), (v2, -dp2)])
                }
            }
        }
    }

    fn residual(&self, z: &[f64], active: &[Constraint]) -> Vec<f64> {
        let m = self.num_vars();
        let k_count = self.scale.len();
        let (x, rest) = z.split_at(m);
        let (mu, nu) = rest.split_at(k_count);
        let mut stat = self.gradient(x);
        let mut rows = Vec::with_capacity(z.len());
        let mut cons_rows = Vec::with_capacity(active.len());
        for (j, &c) in active.iter().enumerate() {
            let (value, grad) = self.constraint(c, x);
            let (row_scale, mult_scale) = self.constraint_scale(c);
            for (i, d) in grad {
                stat[i] -= nu[j] * mult_scale * d;
            }
            cons_rows.push(value / row_scale);
        }
        for i in 0..m {
            let k = self.owner[i];
            rows.push(stat[i] / self.scale[k] - mu[k]);
        }
        let mut sums = vec![0.0; k_count];
        for i in 0..m {
            sums[self.owner[i]] += x[i];
        }
        rows.extend(sums.iter().zip(&self.demand_nats).map(|(s, d)| s - d));
        rows.extend(cons_rows);
        rows
    }

    fn solve(&self, x0: &[f64], mu0: &[f64], active: &[Constraint], nu0: &[f64]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>, f64, usize)> {
        let mut z: Vec<f64> = x0.to_vec();
        z.extend_from_slice(mu0);
        z.extend_from_slice(nu0);
        let report = solve_system(|z| self.residual(z, active), &z, 1e-11, 200);
        if !(report.residual_norm < KKT_ACCEPT) {
            return None;
        }
        let m = self.num_vars();
        let k = self.scale.len();
        let s = report.solution;
        Some((s[..m].to_vec(), s[m..m + k].to_vec(), s[m + k..].to_vec(), report.residual_norm, report.iterations))
    }

    fn uses(&self, x: &[f64]) -> Vec<SubcarrierUse> {
        let mut out = vec![SubcarrierUse::Unused; self.num_subcarriers];
        for (b, (p1, p2)) in self.blocks.iter().zip(self.powers(x)) {
            let (p1, p2) = (p1.max(0.0), p2.max(0.0));
            match *b {
                Block::Sole { n, user, rrh, .. } => out[n] = SubcarrierUse::Sole { user, rrh, power_w: p1 },
                Block::Single { n, k1, k2, rrh, .. } => {
                    out[n] = SubcarrierUse::SingleSic { k1, k2, rrh, p1_w: p1, p2_w: p2 }
                }
                Block::Mutual { n, k1, r1, k2, r2, .. } => {
                    out[n] = SubcarrierUse::MutualSic { k1, r1, k2, r2, p1_w: p1, p2_w: p2 }
                }
            }
        }
        out
    }

    /// Active-set loop. `fixed` constraints stay active and need non-negative
    /// multipliers; `forbidden` constraints must hold without being activated.
    fn active_set(
        &self,
        x0: &[f64],
        fixed: &[Constraint],
        optional: &[Constraint],
        forbidden: &[Constraint],
    ) -> Option<PaSolution> {
        let mut active: Vec<Constraint> = fixed.to_vec();
        let mut x = x0.to_vec();
        let mut mu = vec![1.0; self.scale.len()];
        let mut nu = vec![0.0; active.len()];
        let mut newton_iterations = 0;
        for _ in 0..(4 * optional.len() + 8) {
            let (xs, mus, nus, residual, iters) = self.solve(&x, &mu, &active, &nu)?;
            newton_iterations += iters;
            x = xs;
            mu = mus;
            nu = nus;

            let worst_multiplier = active
                .iter()
                .enumerate()
                .filter(|(_, c)| !fixed.contains(c))
                .map(|(j, _)| (j, nu[j]))
                .filter(|(_, v)| *v < -ACTIVE_TOL)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((j, _)) = worst_multiplier {
                active.remove(j);
                nu.remove(j);
                continue;
            }
            if fixed.iter().any(|c| nu[active.iter().position(|a| a == c).unwrap()] < -ACTIVE_TOL) {
                return None;
            }
            let violation = |c: &Constraint| {
                let (value, _) = self.constraint(*c, &x);
                value / self.constraint_scale(*c).0
            };
            if forbidden.iter().any(|c| violation(c) < -ACTIVE_TOL) {
                return None;
            }
            let worst = optional
                .iter()
                .filter(|c| !active.contains(c))
                .map(|c| (*c, violation(c)))
                .filter(|(_, v)| *v < -ACTIVE_TOL)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((c, _)) = worst {
                active.push(c);
                nu.push(0.0);
                continue;
            }
            let uses = self.uses(&x);
            let total_power_w = uses.iter().map(SubcarrierUse::total_power).sum();
            return Some(PaSolution {
                uses,
                total_power_w,
                kkt_residual: residual,
                newton_iterations,
                active_constraints: active.len(),
            });
        }
        None
    }

    fn rate_constraints(&self) -> Vec<Constraint> {
        (0..self.num_vars()).map(Constraint::RateNonneg).collect()
    }

    fn order_constraints(&self) -> Vec<Constraint> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| matches!(b, Block::Single { .. }))
            .map(|(i, _)| Constraint::SingleOrder(i))
            .collect()
    }

    fn mutual_blocks(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| matches!(b, Block::Mutual { .. }))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Minimal-power allocation for a fixed assignment of sole and same-RRH pairs.
///
/// Starts from the given powers. If the KKT system cannot be solved, or the
/// result would use more power than the input, the input is returned with
/// `fallback` set.
pub fn optimal_power_allocation(
    uses: &[SubcarrierUse],
    channel: &ChannelTensor,
    demands_bps: &[f64],
) -> Result<OptimalPaOutcome> {
    if uses.iter().any(|u| matches!(u, SubcarrierUse::MutualSic { .. })) {
        return Err(invalid("optimal power allocation covers sole and same-RRH links only"));
    }
    let input_total_w: f64 = uses.iter().map(SubcarrierUse::total_power).sum();
    let (problem, x0) = Problem::build(uses, channel, demands_bps)?;
    let mut optional = problem.rate_constraints();
    optional.extend(problem.order_constraints());
    let solved = problem.active_set(&x0, &[], &optional, &[]);
    Ok(match solved {
        Some(sol) if sol.total_power_w <= input_total_w * (1.0 + 1e-9) => OptimalPaOutcome {
            total_power_w: sol.total_power_w,
            uses: sol.uses,
            input_total_w,
            kkt_residual: sol.kkt_residual,
            converged: true,
            fallback: false,
        },
        other => OptimalPaOutcome {
            uses: uses.to_vec(),
            total_power_w: input_total_w,
            input_total_w,
            kkt_residual: other.map_or(f64::INFINITY, |s| s.kkt_residual),
            converged: false,
            fallback: true,
        },
    })
}

/// Exhaustive constrained optimum for assignments with at most two mutual-SIC
/// subcarriers, trying every combination of active window edges.
pub fn constrained_mutual_pa_oracle(
    uses: &[SubcarrierUse],
    channel: &ChannelTensor,
    demands_bps: &[f64],
) -> Result<PaSolution> {
    let (problem, x0) = Problem::build(uses, channel, demands_bps)?;
    let mutual = problem.mutual_blocks();
    if mutual.len() > 2 {
        return Err(invalid(format!("{} mutual-SIC subcarriers, the oracle handles at most 2", mutual.len())));
    }
    let mut optional = problem.rate_constraints();
    optional.extend(problem.order_constraints());
    let mut best: Option<PaSolution> = None;
    for combo in 0..3usize.pow(mutual.len() as u32) {
        let mut fixed = Vec::new();
        let mut forbidden = Vec::new();
        let mut code = combo;
        for &b in &mutual {
            match code % 3 {
                0 => forbidden.extend([Constraint::WindowLow(b), Constraint::WindowHigh(b)]),
                1 => {
                    fixed.push(Constraint::WindowLow(b));
                    forbidden.push(Constraint::WindowHigh(b));
                }
                _ => {
                    fixed.push(Constraint::WindowHigh(b));
                    forbidden.push(Constraint::WindowLow(b));
                }
            }
            code /= 3;
        }
        if let Some(sol) = problem.active_set(&x0, &fixed, &optional, &forbidden) {
            if best.as_ref().map_or(true, |b| sol.total_power_w < b.total_power_w) {
                best = Some(sol);
            }
        }
    }
    best.ok_or(Error::OracleInfeasible)
}
