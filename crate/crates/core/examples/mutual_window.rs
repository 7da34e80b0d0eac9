//! Two users on different RRHs sharing a subcarrier. Shows the admissible
//! power window and what each adjustment rule does with it.

use noma_das::mutual_sic::*;

fn main() -> noma_das::Result<()> {
    let sigma2 = 1e-3;
    // k1 is served by RRH a, k2 by RRH b; g12 is k1's link to b, g21 is k2's link to a.
    let gains = PairGains::new(2.0, 0.5, 0.6, 0.1);
    println!("feasible: {}", mutual_sic_feasible(&gains));
    let (lo, hi) = gains.ratio_bounds();
    println!("p2 / p1 must lie in [{lo:.3}, {hi:.3}]");

    let p1 = 0.4;
    let (w_lo, w_hi) = power_window(&gains, p1);
    println!("with p1 = {p1}: p2 in [{w_lo:.4}, {w_hi:.4}]");

    let (w2, n2) = (0.9, 2);
    let candidate = w2 - sigma2 / gains.g22;
    let dpa = dpa_adjust(candidate, &gains, p1, 0.01);
    println!("waterfilled p2 {candidate:.4}, moved into the window {dpa:.4}");

    let input = OpadInput {
        sigma2,
        n_sole_1: 3,
        n_sole_2: n2,
        mu: 0.01,
        initial_p1_w: p1,
        waterline1_w: 0.41,
        waterline2_w: w2,
        floor1_w: 0.002,
        floor2_w: 0.02,
    };
    let joint = opad_optimize(&gains, &input)?;
    println!(
        "joint adjustment: p1 {:.4}, p2 {:.4} ({:?}), net change {:.5} W",
        joint.p1_w,
        joint.p2_w,
        joint.case,
        joint.total_delta_w()
    );
    Ok(())
}
