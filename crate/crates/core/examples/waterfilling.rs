//! Waterfilling one user over a handful of subcarriers, then adding one more.

use noma_das::waterfill::*;

fn main() -> noma_das::Result<()> {
    let sigma2 = 1e-3;
    let b_over_s = 156_250.0;
    let rate = 2e6;
    let mut gains = vec![0.8, 2.5, 1.1, 0.4];

    let w = waterline_from_rate(&gains, rate, sigma2, b_over_s)?;
    let show = |gains: &[f64], w: f64| {
        let powers: Vec<f64> = gains.iter().map(|g| w - sigma2 / g).collect();
        let rate: f64 = gains.iter().zip(&powers).map(|(g, p)| rate_single(*p, *g, sigma2, b_over_s).unwrap()).sum();
        println!("  waterline {w:.5} W, total {:.5} W, rate {:.0} bps", powers.iter().sum::<f64>(), rate);
        for (g, p) in gains.iter().zip(&powers) {
            println!("    gain {g:5.2}  power {p:.5} W");
        }
    };
    println!("{} subcarriers:", gains.len());
    show(&gains, w);

    for g in [0.05, 1.7] {
        if !admits_waterline_decrease(g, w, sigma2) {
            println!("gain {g}: below the water floor, no saving");
            continue;
        }
        let w_new = waterline_add(w, gains.len(), g, sigma2);
        let delta = delta_power_oma(w, w_new, gains.len(), g, sigma2);
        println!("gain {g}: adding it saves {:.5} W", -delta);
        gains.push(g);
        show(&gains, w_new);
        break;
    }
    Ok(())
}
