//! Power for the second user on a shared subcarrier: the fractional rule
//! against the power that minimizes the pair's total.

use noma_das::waterfill::*;

fn main() -> noma_das::Result<()> {
    let (sigma2, alpha, mu) = (1.0, 0.5, 0.01);
    // The second user already waterfills over three subcarriers.
    let (w2, n2) = (12.0, 3);
    let (g1, p1) = (6.0, 0.9);
    println!("{:>6} {:>10} {:>10} {:>12} {:>12}", "g2", "p2 ftpa", "p2 lpo", "saving ftpa", "saving lpo");
    for g2 in [0.3, 0.8, 1.5, 3.0] {
        let saving = |p2: f64| -delta_power_noma(w2, shifted_waterline_second(w2, p2, p1, g2, sigma2, n2), n2, p2);
        let ftpa = ftpa_power(p1, g1, g2, alpha);
        let lpo = lpo_power(w2, p1, g2, sigma2, n2, mu);
        match lpo {
            Ok(lpo) => println!("{g2:>6} {ftpa:>10.4} {lpo:>10.4} {:>12.4} {:>12.4}", saving(ftpa), saving(lpo)),
            Err(e) => println!("{g2:>6} {ftpa:>10.4} {:>10} {:>12.4} ({e})", "-", saving(ftpa)),
        }
    }
    Ok(())
}
