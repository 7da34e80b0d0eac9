//! Mutual successive interference cancellation on subcarriers served by two RRHs.
//!
//! User `k1` is served by RRH `r1` and user `k2` by `r2 != r1` on the same
//! subcarrier. When the cross-gain condition holds, power levels exist at
//! which each user can decode and cancel the other's signal, so both see an
//! interference-free rate.

use crate::error::{Error, Result};
use crate::solver::{solve_scalar, SCALAR_TOL};
use crate::waterfill::shannon;

/// Link gains of a candidate pair: `gij` is user `ki`'s gain from RRH `rj`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGains {
    pub g11: f64,
    pub g12: f64,
    pub g21: f64,
    pub g22: f64,
}

impl PairGains {
    pub fn new(g11: f64, g12: f64, g21: f64, g22: f64) -> Self {
        Self { g11, g12, g21, g22 }
    }

    pub fn is_valid(&self) -> bool {
        [self.g11, self.g12, self.g21, self.g22]
            .iter()
            .all(|g| g.is_finite() && *g > 0.0)
    }

    /// Lower and upper bounds of the admissible ratio `p2 / p1`.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        (self.g11 / self.g12, self.g21 / self.g22)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.g11 * s, self.g12 * s, self.g21 * s, self.g22 * s)
    }
}

/// Powers on a candidate subcarrier and the waterlines before pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPowers {
    pub p1_w: f64,
    pub p2_w: f64,
    pub initial_p1_w: f64,
    pub initial_waterline1_w: f64,
    pub initial_waterline2_w: f64,
}

/// Which gain test admits a subcarrier for mutual SIC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SicTest {
    /// `g11 g22 <= g21 g12`, the product form.
    #[default]
    CrossProduct,
    /// Both per-link orderings `g12 >= g22` and `g21 >= g11`.
    Strict,
}

pub fn mutual_sic_feasible(gains: &PairGains) -> bool {
    mutual_sic_feasible_with(gains, SicTest::CrossProduct)
}

pub fn mutual_sic_feasible_with(gains: &PairGains, test: SicTest) -> bool {
    match test {
        SicTest::CrossProduct => gains.g11 * gains.g22 <= gains.g21 * gains.g12,
        SicTest::Strict => gains.g12 >= gains.g22 && gains.g21 >= gains.g11,
    }
}

/// Exact SIC rate-condition terms `(X - Y, Z - T)`.
///
/// User `k1` can cancel `k2` iff the first is non-negative, and `k2` can
/// cancel `k1` iff the second is.
pub fn rate_condition_terms(gains: &PairGains, p1_w: f64, p2_w: f64, sigma2: f64) -> (f64, f64) {
    let PairGains { g11, g12, g21, g22 } = *gains;
    let common = p1_w * p2_w * (g12 * g21 - g22 * g11);
    let x_minus_y = common + sigma2 * p2_w * (g12 - g22);
    let z_minus_t = common + sigma2 * p1_w * (g21 - g11);
    (x_minus_y, z_minus_t)
}

/// Admissible interval for `p2` given `p1`. Empty when `lo > hi`.
pub fn power_window(gains: &PairGains, p1_w: f64) -> (f64, f64) {
    let (lo, hi) = gains.ratio_bounds();
    (p1_w * lo, p1_w * hi)
}

/// True iff `(p1, p2)` satisfies the received-power ordering at both users,
/// up to a relative tolerance.
pub fn within_window(gains: &PairGains, p1_w: f64, p2_w: f64, rel_tol: f64) -> bool {
    let (lo, hi) = power_window(gains, p1_w);
    p2_w >= lo * (1.0 - rel_tol) && p2_w <= hi * (1.0 + rel_tol)
}

/// Moves `p2` into the window: below the window it lands at `(1 + mu) lo`,
/// above it at `(1 - mu) hi`.
pub fn dpa_adjust(p2_candidate_w: f64, gains: &PairGains, p1_w: f64, mu: f64) -> f64 {
    let (lo, hi) = power_window(gains, p1_w);
    if p2_candidate_w < lo {
        (1.0 + mu) * lo
    } else if p2_candidate_w > hi {
        (1.0 - mu) * hi
    } else {
        p2_candidate_w
    }
}

/// Interference-free rates of both users under mutual SIC.
pub fn mutual_rates(gains: &PairGains, p1_w: f64, p2_w: f64, sigma2: f64, b_over_s: f64) -> (f64, f64) {
    (
        shannon(p1_w * gains.g11 / sigma2, b_over_s),
        shannon(p2_w * gains.g22 / sigma2, b_over_s),
    )
}

/// Power change of the second user when it takes `p2` interference-free
/// and re-waterfills its `n_sole` sole subcarriers.
pub fn delta_second(waterline2: f64, p2_w: f64, g22: f64, sigma2: f64, n_sole_2: usize) -> f64 {
    let n = n_sole_2 as f64;
    n * waterline2 * ((-(p2_w * g22 / sigma2).ln_1p() / n).exp() - 1.0) + p2_w
}

/// Power change of the first user when its power on the subcarrier moves
/// from `p1_initial` to `p1`, with the subcarrier leaving its sole set of
/// `n_sole_1` (so `n_sole_1 - 1` subcarriers absorb the rate change).
pub fn delta_first(waterline1: f64, p1_w: f64, p1_initial_w: f64, g11: f64, sigma2: f64, n_sole_1: usize) -> f64 {
    let m = (n_sole_1 - 1) as f64;
    let log_ratio = ((sigma2 + p1_w * g11) / (sigma2 + p1_initial_w * g11)).ln();
    m * waterline1 * ((-log_ratio / m).exp() - 1.0) + p1_w - p1_initial_w
}

/// Power variations `(dP_k1, dP_k2)` of a mutual pairing with adjusted powers.
pub fn sopa_deltas(
    powers: &PairPowers,
    gains: &PairGains,
    sigma2: f64,
    n_sole_1: usize,
    n_sole_2: usize,
) -> Result<(f64, f64)> {
    if n_sole_1 < 2 {
        return Err(Error::CandidateRejected("first user would lose its last sole subcarrier"));
    }
    if n_sole_2 < 1 {
        return Err(Error::CandidateRejected("second user has no sole subcarriers"));
    }
    let dp1 = delta_first(
        powers.initial_waterline1_w,
        powers.p1_w,
        powers.initial_p1_w,
        gains.g11,
        sigma2,
        n_sole_1,
    );
    let dp2 = delta_second(powers.initial_waterline2_w, powers.p2_w, gains.g22, sigma2, n_sole_2);
    Ok((dp1, dp2))
}

/// Everything about the two users that the power adjustment needs besides gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpadInput {
    pub sigma2: f64,
    /// Sole subcarriers of `k1`, including the candidate subcarrier.
    pub n_sole_1: usize,
    pub n_sole_2: usize,
    pub mu: f64,
    /// Current power of `k1` on the candidate subcarrier.
    pub initial_p1_w: f64,
    pub waterline1_w: f64,
    pub waterline2_w: f64,
    /// Largest `sigma2 / g` over `k1`'s sole set without the candidate (0 if empty).
    pub floor1_w: f64,
    /// Largest `sigma2 / g` over `k2`'s sole set.
    pub floor2_w: f64,
}

/// Which KKT branch produced the adjusted powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpadCase {
    /// Both window constraints inactive.
    Unconstrained,
    /// `p2` pinned at the lower edge of the window.
    LowerEdge,
    /// `p2` pinned at the upper edge of the window.
    UpperEdge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpadSolution {
    pub p1_w: f64,
    pub p2_w: f64,
    pub delta_p1_w: f64,
    pub delta_p2_w: f64,
    pub case: OpadCase,
    /// Stationarity residual when the optimum is interior to its ray.
    pub residual: Option<f64>,
}

impl OpadSolution {
    pub fn total_delta_w(&self) -> f64 {
        self.delta_p1_w + self.delta_p2_w
    }
}

/// Derivative of the second user's power change with respect to `p2`.
pub fn delta_second_slope(waterline2: f64, p2_w: f64, g22: f64, sigma2: f64, n_sole_2: usize) -> f64 {
    let n = n_sole_2 as f64;
    let a = g22 / sigma2;
    1.0 - waterline2 * a * (-(1.0 / n + 1.0) * (p2_w * a).ln_1p()).exp()
}

/// Derivative of the first user's power change with respect to `p1`.
pub fn delta_first_slope(waterline1: f64, p1_w: f64, p1_initial_w: f64, g11: f64, sigma2: f64, n_sole_1: usize) -> f64 {
    let m = (n_sole_1 - 1) as f64;
    let base = sigma2 + p1_initial_w * g11;
    let ratio = (sigma2 + p1_w * g11) / base;
    1.0 - waterline1 * g11 / base * (-(1.0 / m + 1.0) * ratio.ln()).exp()
}

/// Stationarity function of a boundary case `p2 = slope * p1`.
pub fn edge_stationarity(gains: &PairGains, input: &OpadInput, slope: f64, p1_w: f64) -> f64 {
    delta_first_slope(input.waterline1_w, p1_w, input.initial_p1_w, gains.g11, input.sigma2, input.n_sole_1)
        + slope * delta_second_slope(input.waterline2_w, slope * p1_w, gains.g22, input.sigma2, input.n_sole_2)
}

/// Largest `p2` keeping the second user's sole waterline at or above its floor.
fn p2_cap(input: &OpadInput, g22: f64) -> f64 {
    if input.floor2_w <= 0.0 {
        return f64::INFINITY;
    }
    let n = input.n_sole_2 as f64;
    let ratio = input.waterline2_w / input.floor2_w;
    (n * ratio.ln()).exp_m1() * input.sigma2 / g22
}

/// Largest `p1` keeping the first user's remaining waterline at or above its floor.
fn p1_cap(input: &OpadInput, g11: f64) -> f64 {
    if input.floor1_w <= 0.0 || input.n_sole_1 < 2 {
        return f64::INFINITY;
    }
    let m = (input.n_sole_1 - 1) as f64;
    let base = input.sigma2 + input.initial_p1_w * g11;
    let ratio = input.waterline1_w / input.floor1_w;
    ((m * ratio.ln()).exp() * base - input.sigma2) / g11
}

/// Unconstrained waterfilling power for the second user on the candidate.
pub fn waterfill_second_power(waterline2: f64, g22: f64, sigma2: f64, n_sole_2: usize) -> f64 {
    let n = n_sole_2 as f64;
    let x = waterline2 * g22 / sigma2;
    (n / (n + 1.0) * x.ln()).exp_m1() * sigma2 / g22
}

/// Jointly adjusts both users' powers on a mutual-SIC candidate.
///
/// Evaluates the unconstrained branch and the two window-edge branches (with
/// the safety margin applied to the edge), keeping the feasible branch with
/// the lowest joint power change. When `k1` holds only this sole subcarrier
/// its power stays fixed and only `p2` is adjusted.
pub fn opad_optimize(gains: &PairGains, input: &OpadInput) -> Result<OpadSolution> {
    if input.n_sole_2 < 1 {
        return Err(Error::CandidateRejected("second user has no sole subcarriers"));
    }
    let sigma2 = input.sigma2;
    let p1_i = input.initial_p1_w;
    let p2_max = p2_cap(input, gains.g22);
    let (lo_ratio, hi_ratio) = gains.ratio_bounds();
    let p2_wf = waterfill_second_power(input.waterline2_w, gains.g22, sigma2, input.n_sole_2).min(p2_max);
    let d2 = |p2: f64| delta_second(input.waterline2_w, p2, gains.g22, sigma2, input.n_sole_2);

    if input.n_sole_1 < 2 {
        let p2 = dpa_adjust(p2_wf, gains, p1_i, input.mu);
        if !(p2 > 0.0) || p2 > p2_max * (1.0 + 1e-12) || !within_window(gains, p1_i, p2, 1e-12) {
            return Err(Error::CandidateRejected("no admissible power for the second user"));
        }
        let case = if p2 == p2_wf {
            OpadCase::Unconstrained
        } else if p2 < p2_wf {
            OpadCase::UpperEdge
        } else {
            OpadCase::LowerEdge
        };
        return Ok(OpadSolution { p1_w: p1_i, p2_w: p2, delta_p1_w: 0.0, delta_p2_w: d2(p2), case, residual: None });
    }

    let d1 = |p1: f64| delta_first(input.waterline1_w, p1, p1_i, gains.g11, sigma2, input.n_sole_1);
    let mut best: Option<OpadSolution> = None;
    let mut consider = |sol: OpadSolution| {
        let ok = sol.p1_w > 0.0
            && sol.p2_w > 0.0
            && sol.total_delta_w().is_finite()
            && within_window(gains, sol.p1_w, sol.p2_w, 1e-12);
        if ok && best.map_or(true, |b| sol.total_delta_w() < b.total_delta_w()) {
            best = Some(sol);
        }
    };

    // Unconstrained: k1 keeps its waterfilling power, k2 waterfills.
    if p2_wf > 0.0 {
        consider(OpadSolution {
            p1_w: p1_i,
            p2_w: p2_wf,
            delta_p1_w: 0.0,
            delta_p2_w: d2(p2_wf),
            case: OpadCase::Unconstrained,
            residual: None,
        });
    }

    let p1_max_k1 = p1_cap(input, gains.g11);
    for (case, slope) in [
        (OpadCase::LowerEdge, (1.0 + input.mu) * lo_ratio),
        (OpadCase::UpperEdge, (1.0 - input.mu) * hi_ratio),
    ] {
        let p1_max = p1_max_k1.min(p2_max / slope);
        if let Some((p1, residual)) = minimize_on_ray(gains, input, slope, p1_max) {
            let p2 = slope * p1;
            consider(OpadSolution { p1_w: p1, p2_w: p2, delta_p1_w: d1(p1), delta_p2_w: d2(p2), case, residual });
        }
    }

    best.ok_or(Error::CandidateRejected("no branch yields positive admissible powers"))
}

/// Minimizes the joint power change along `p2 = slope * p1` over `(0, p1_max]`.
///
/// The objective is convex in `p1`, so the minimizer is the root of the
/// stationarity function when one exists inside the interval, otherwise the
/// cap. When the objective keeps decreasing towards `p1 -> 0` there is no
/// positive minimizer, and the point at the initial `p1` is returned instead.
fn minimize_on_ray(gains: &PairGains, input: &OpadInput, slope: f64, p1_max: f64) -> Option<(f64, Option<f64>)> {
    if !(p1_max > 0.0) {
        return None;
    }
    let g = |p1: f64| edge_stationarity(gains, input, slope, p1);
    let scale = input.initial_p1_w.max(input.sigma2 / gains.g11);
    let lo = (scale * 1e-12).min(0.5 * p1_max);
    if g(lo) >= 0.0 {
        return Some((input.initial_p1_w.min(p1_max), None));
    }
    let mut hi = scale.min(p1_max);
    while g(hi) < 0.0 {
        if hi >= p1_max {
            return Some((p1_max, None));
        }
        hi = (hi * 4.0).min(p1_max);
    }
    let report = solve_scalar(g, lo, hi, SCALAR_TOL * 1e-2).ok()?;
    let p1 = report.root();
    Some((p1, Some(g(p1))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasibility_examples() {
        assert!(mutual_sic_feasible(&PairGains::new(1.0, 4.0, 4.0, 1.0)));
        assert!(!mutual_sic_feasible(&PairGains::new(4.0, 1.0, 2.0, 2.0)));
        // Same RRH twice: only the equality boundary passes.
        assert!(mutual_sic_feasible(&PairGains::new(2.0, 2.0, 3.0, 3.0)));
        assert!(!mutual_sic_feasible(&PairGains::new(2.0, 2.0 * 0.999, 3.0, 3.0)));
    }

    #[test]
    fn strict_test_implies_cross_product() {
        let g = PairGains::new(1.0, 4.0, 4.0, 1.0);
        assert!(mutual_sic_feasible_with(&g, SicTest::Strict));
        // Product form accepts what the per-link test refuses.
        let g = PairGains::new(1.0, 0.9, 4.0, 1.0);
        assert!(mutual_sic_feasible(&g));
        assert!(!mutual_sic_feasible_with(&g, SicTest::Strict));
    }

    #[test]
    fn rate_terms_examples() {
        let g = PairGains::new(1.0, 4.0, 4.0, 1.0);
        assert_eq!(rate_condition_terms(&g, 1.0, 1.0, 1.0), (18.0, 18.0));
        assert_eq!(rate_condition_terms(&g, 0.0, 0.0, 1.0), (0.0, 0.0));
        // Single RRH: opposite signs.
        let g = PairGains::new(2.0, 2.0, 0.5, 0.5);
        let (a, b) = rate_condition_terms(&g, 1.3, 2.1, 0.7);
        assert!(a * b < 0.0);
    }

    #[test]
    fn window_examples() {
        assert_eq!(power_window(&PairGains::new(1.0, 4.0, 4.0, 1.0), 1.0), (0.25, 4.0));
        let (lo, hi) = power_window(&PairGains::new(4.0, 1.0, 2.0, 2.0), 1.0);
        assert_eq!((lo, hi), (4.0, 1.0));
        let (lo, hi) = power_window(&PairGains::new(2.0, 1.0, 4.0, 2.0), 3.0);
        assert_eq!(lo, hi);
    }

    #[test]
    fn dpa_examples() {
        let g = PairGains::new(1.0, 4.0, 4.0, 1.0);
        assert_eq!(dpa_adjust(1.0, &g, 1.0, 0.01), 1.0);
        assert!((dpa_adjust(0.1, &g, 1.0, 0.01) - 0.2525).abs() < 1e-15);
        assert!((dpa_adjust(10.0, &g, 1.0, 0.01) - 3.96).abs() < 1e-15);
        for p in [0.01, 0.3, 2.0, 50.0] {
            let once = dpa_adjust(p, &g, 1.0, 0.01);
            assert_eq!(dpa_adjust(once, &g, 1.0, 0.01), once);
        }
    }

    #[test]
    fn mutual_rate_examples() {
        let g = PairGains::new(1.0, 4.0, 4.0, 1.0);
        assert_eq!(mutual_rates(&g, 0.0, 0.0, 1.0, 1.0), (0.0, 0.0));
        let (r1, _) = mutual_rates(&g, 3.0, 1.0, 1.0, 1.0);
        assert!((r1 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sopa_trivial_cases() {
        let g = PairGains::new(1.0, 4.0, 4.0, 1.0);
        let p = PairPowers { p1_w: 2.0, p2_w: 0.0, initial_p1_w: 2.0, initial_waterline1_w: 3.0, initial_waterline2_w: 5.0 };
        let (d1, d2) = sopa_deltas(&p, &g, 1.0, 3, 2).unwrap();
        assert_eq!(d1, 0.0);
        assert_eq!(d2, 0.0);
        assert!(matches!(sopa_deltas(&p, &g, 1.0, 1, 2), Err(Error::CandidateRejected(_))));
    }

    #[test]
    fn slopes_match_finite_differences() {
        let (w1, p1i, g11, s2, n1) = (5.0, 3.0, 2.0, 1.0, 4);
        let (w2, g22, n2) = (7.0, 0.8, 3);
        for x in [0.5, 3.0, 9.0] {
            let h = 1e-6;
            let fd1 = (delta_first(w1, x + h, p1i, g11, s2, n1) - delta_first(w1, x - h, p1i, g11, s2, n1)) / (2.0 * h);
            assert!((fd1 - delta_first_slope(w1, x, p1i, g11, s2, n1)).abs() < 1e-7);
            let fd2 = (delta_second(w2, x + h, g22, s2, n2) - delta_second(w2, x - h, g22, s2, n2)) / (2.0 * h);
            assert!((fd2 - delta_second_slope(w2, x, g22, s2, n2)).abs() < 1e-7);
        }
    }

    #[test]
    fn opad_keeps_inactive_window() {
        // Wide window: the waterfilling powers are already admissible.
        let g = PairGains::new(1.0, 100.0, 100.0, 1.0);
        let input = OpadInput {
            sigma2: 1.0,
            n_sole_1: 3,
            n_sole_2: 3,
            mu: 0.01,
            initial_p1_w: 4.0,
            waterline1_w: 5.0,
            waterline2_w: 5.0,
            floor1_w: 0.0,
            floor2_w: 0.0,
        };
        let sol = opad_optimize(&g, &input).unwrap();
        assert_eq!(sol.case, OpadCase::Unconstrained);
        assert_eq!(sol.p1_w, 4.0);
        assert!((sol.p2_w - waterfill_second_power(5.0, 1.0, 1.0, 3)).abs() < 1e-12);
    }
}
