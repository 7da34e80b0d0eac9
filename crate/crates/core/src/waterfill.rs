//! Single-RRH power mathematics.
//!
//! Every gain here is a linear power ratio `|h|^2`; `sigma2` is the per-subcarrier
//! noise power in watts and `b_over_s` the subcarrier bandwidth in hertz. A
//! user's *sole* subcarriers share one waterline `w`: the power on a sole
//! subcarrier with gain `g` is `w - sigma2 / g`.

use crate::error::{invalid, Error, Result};

/// Absolute tolerance used for power threshold comparisons.
pub const POWER_EPS: f64 = 1e-15;

/// Shannon rate of an interference-free link.
pub fn rate_single(power_w: f64, gain: f64, sigma2: f64, b_over_s: f64) -> Result<f64> {
    if power_w < 0.0 {
        return Err(invalid(format!("negative power {power_w}")));
    }
    Ok(shannon(power_w * gain / sigma2, b_over_s))
}

/// Rate of the weaker user on a same-RRH pair, treating the stronger user's
/// signal as interference.
pub fn rate_second(p2_w: f64, p1_w: f64, gain2: f64, sigma2: f64, b_over_s: f64) -> Result<f64> {
    if p2_w < 0.0 || p1_w < 0.0 {
        return Err(invalid(format!("negative power ({p2_w}, {p1_w})")));
    }
    Ok(shannon(p2_w * gain2 / (p1_w * gain2 + sigma2), b_over_s))
}

#[inline]
pub(crate) fn shannon(snr: f64, b_over_s: f64) -> f64 {
    b_over_s * snr.ln_1p() / std::f64::consts::LN_2
}

/// Power needed on one interference-free subcarrier to carry `rate_bps`.
pub fn power_for_rate(rate_bps: f64, gain: f64, sigma2: f64, b_over_s: f64) -> f64 {
    (rate_bps / b_over_s * std::f64::consts::LN_2).exp_m1() * sigma2 / gain
}

/// Closed-form waterline carrying `target_rate_bps` over `gains`.
///
/// Fails with [`Error::InfeasibleWaterline`] when some subcarrier would need
/// negative power, meaning that set cannot be kept.
pub fn waterline_from_rate(gains: &[f64], target_rate_bps: f64, sigma2: f64, b_over_s: f64) -> Result<f64> {
    if gains.is_empty() {
        return Err(invalid("waterline over an empty subcarrier set"));
    }
    if target_rate_bps < 0.0 {
        return Err(invalid(format!("negative rate {target_rate_bps}")));
    }
    let n = gains.len() as f64;
    let log_sum: f64 = gains.iter().map(|g| (sigma2 / g).ln()).sum();
    let w = ((target_rate_bps / b_over_s * std::f64::consts::LN_2 + log_sum) / n).exp();
    ensure_above_floor(w, floor_of(gains, sigma2))?;
    Ok(w)
}

/// Largest inverse gain `sigma2 / g` over a set; a waterline must not drop below it.
pub fn floor_of(gains: &[f64], sigma2: f64) -> f64 {
    gains.iter().map(|g| sigma2 / g).fold(0.0, f64::max)
}

pub(crate) fn ensure_above_floor(waterline: f64, floor: f64) -> Result<()> {
    if waterline < floor * (1.0 - 1e-12) || !waterline.is_finite() {
        Err(Error::InfeasibleWaterline { waterline, floor })
    } else {
        Ok(())
    }
}

/// True iff adding a subcarrier of this gain lowers the waterline.
pub fn admits_waterline_decrease(gain: f64, waterline_w: f64, sigma2: f64) -> bool {
    gain > sigma2 / waterline_w
}

/// Waterline after adding one subcarrier to a set of `n_current`, keeping the rate.
pub fn waterline_add(waterline_w: f64, n_current: usize, gain: f64, sigma2: f64) -> f64 {
    let n = n_current as f64;
    ((n * waterline_w.ln() - (gain / sigma2).ln()) / (n + 1.0)).exp()
}

/// Total power change of an OMA assignment: `(N+1) w_new - N w_old - sigma2/g`.
pub fn delta_power_oma(w_old: f64, w_new: f64, n_old: usize, gain: f64, sigma2: f64) -> f64 {
    let n = n_old as f64;
    (n + 1.0) * w_new - n * w_old - sigma2 / gain
}

/// Waterline after the sole set's rate changes by `delta_rate_bps`.
///
/// `floor_w` is the largest `sigma2 / g` on the sole set; the shifted
/// waterline must stay at or above it.
pub fn waterline_rate_shift(
    waterline_w: f64,
    delta_rate_bps: f64,
    n_sole: usize,
    b_over_s: f64,
    floor_w: f64,
) -> Result<f64> {
    if n_sole == 0 {
        return Err(Error::CandidateRejected("no sole subcarriers to absorb the rate change"));
    }
    let exponent = delta_rate_bps / (b_over_s * n_sole as f64);
    let w = waterline_w * (exponent * std::f64::consts::LN_2).exp();
    ensure_above_floor(w, floor_w)?;
    Ok(w)
}

/// Total power change of a pairing: `N_sole (w_new - w_old) + p2`.
pub fn delta_power_noma(w_old: f64, w_new: f64, n_sole: usize, p2_w: f64) -> f64 {
    n_sole as f64 * (w_new - w_old) + p2_w
}

/// Fractional transmit power allocation for the second user.
pub fn ftpa_power(p1_w: f64, gain1: f64, gain2: f64, alpha: f64) -> f64 {
    p1_w * (gain1 / gain2).powf(alpha)
}

/// Locally optimal second-user power on a same-RRH pair.
///
/// Returns the stationary point of the second user's power change when it
/// respects `p2 >= p1`, and `p1 (1 + mu)` otherwise. A candidate whose
/// marginal power cost is already positive at `p2 = 0` is rejected.
pub fn lpo_power(waterline_w: f64, p1_w: f64, gain2: f64, sigma2: f64, n_sole: usize, mu: f64) -> Result<f64> {
    if n_sole == 0 {
        return Err(Error::CandidateRejected("second user has no sole subcarriers"));
    }
    let interference = p1_w * gain2 + sigma2;
    let base = waterline_w * gain2 / interference;
    if base < 1.0 {
        return Err(Error::CandidateRejected("pairing cannot reduce power"));
    }
    let n = n_sole as f64;
    let p_star = (base.powf(n / (n + 1.0)) - 1.0) * (p1_w + sigma2 / gain2);
    if p_star >= p1_w {
        Ok(p_star)
    } else {
        Ok(p1_w * (1.0 + mu))
    }
}

/// Waterline of the second user's sole set after taking `p2` on a same-RRH pair.
pub fn shifted_waterline_second(
    waterline_w: f64,
    p2_w: f64,
    p1_w: f64,
    gain2: f64,
    sigma2: f64,
    n_sole: usize,
) -> f64 {
    let sinr = p2_w * gain2 / (p1_w * gain2 + sigma2);
    waterline_w * (-(sinr.ln_1p()) / n_sole as f64).exp()
}

/// A sole link held by a user: subcarrier, serving RRH, and its gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoleLink {
    pub subcarrier: usize,
    pub rrh: usize,
    pub gain: f64,
}

/// Waterfilling state of one user's sole subcarriers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserWaterState {
    pub waterline_w: f64,
    pub sole: Vec<SoleLink>,
}

impl UserWaterState {
    pub fn sole_count(&self) -> usize {
        self.sole.len()
    }

    pub fn sole_gains(&self) -> Vec<f64> {
        self.sole.iter().map(|l| l.gain).collect()
    }

    pub fn floor(&self, sigma2: f64) -> f64 {
        self.sole.iter().map(|l| sigma2 / l.gain).fold(0.0, f64::max)
    }

    pub fn power_on(&self, link: &SoleLink, sigma2: f64) -> f64 {
        self.waterline_w - sigma2 / link.gain
    }

    pub fn sole_power(&self, sigma2: f64) -> f64 {
        self.sole.iter().map(|l| self.power_on(l, sigma2)).sum()
    }

    pub fn sole_rate_bps(&self, sigma2: f64, b_over_s: f64) -> f64 {
        self.sole
            .iter()
            .map(|l| b_over_s * (self.waterline_w * l.gain / sigma2).log2())
            .sum()
    }

    pub fn position(&self, subcarrier: usize) -> Option<usize> {
        self.sole.iter().position(|l| l.subcarrier == subcarrier)
    }
}
