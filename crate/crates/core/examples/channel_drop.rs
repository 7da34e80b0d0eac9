//! Draws one cell and prints where everyone sits and how strong the links are.
//!
//! ```bash
//! cargo run --release --example channel_drop -- 42
//! ```

use noma_das::ScenarioConfig;

fn main() -> noma_das::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let (scenario, channel) = ScenarioConfig::default().realize(seed)?;

    for (r, p) in scenario.rrh_positions.iter().enumerate() {
        println!("rrh {r}: ({:7.1}, {:7.1}) m", p.x, p.y);
    }
    println!("noise per subcarrier {:.3e} W, checksum {:016x}", channel.noise_power_w, channel.checksum());

    println!("{:>4} {:>16}  best RRH and mean gain (dB) per RRH", "user", "position");
    for (k, p) in scenario.user_positions.iter().enumerate() {
        let mean_db: Vec<f64> = (0..channel.num_rrhs())
            .map(|r| {
                let mean = (0..channel.num_subcarriers()).map(|n| channel.gain(k, n, r)).sum::<f64>()
                    / channel.num_subcarriers() as f64;
                10.0 * mean.log10()
            })
            .collect();
        let best = (0..mean_db.len()).max_by(|a, b| mean_db[*a].total_cmp(&mean_db[*b])).unwrap();
        let cells: Vec<String> = mean_db.iter().map(|g| format!("{g:7.1}")).collect();
        println!("{k:>4} ({:6.0},{:6.0})  {best}  {}", p.x, p.y, cells.join(" "));
    }
    Ok(())
}
