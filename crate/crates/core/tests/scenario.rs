use noma_das::scenario::*;
use noma_das::{ChannelModel, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mean distance from the center over the hexagon by midpoint quadrature.
fn hexagon_mean_distance_numeric(radius: f64) -> f64 {
    let n = 2000;
    let h = 2.0 * radius / n as f64;
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..n {
        for j in 0..n {
            let p = Point { x: -radius + (i as f64 + 0.5) * h, y: -radius + (j as f64 + 0.5) * h };
            if in_hexagon(&p, radius) {
                sum += p.norm();
                count += 1;
            }
        }
    }
    sum / count as f64
}

fn sample_std(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn user_drops_cover_the_hexagon_uniformly() {
    let rrhs = place_rrhs(4, 500.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total = 0.0;
    let mut count = 0;
    for _ in 0..10_000 {
        for p in drop_users(15, 500.0, &rrhs, 10.0, &mut rng).unwrap() {
            assert!(in_hexagon(&p, 500.0));
            assert!(rrhs.iter().all(|q| p.distance(q) >= 10.0));
            total += p.norm();
            count += 1;
        }
    }
    let oracle = hexagon_mean_distance_numeric(500.0);
    assert!((hexagon_mean_distance(500.0) - oracle).abs() < 1e-3 * oracle);
    let mean = total / count as f64;
    assert!((mean - oracle).abs() < 0.02 * oracle, "mean {mean} vs {oracle}");
}

#[test]
fn single_user_drop_is_reproducible() {
    let rrhs = place_rrhs(4, 500.0).unwrap();
    let a = drop_users(1, 500.0, &rrhs, 10.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let b = drop_users(1, 500.0, &rrhs, 10.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(a, b);
    assert!(in_hexagon(&a[0], 500.0));
}

#[test]
fn five_rrhs_form_a_square() {
    let rrhs = place_rrhs(5, 500.0).unwrap();
    let ring = 1000.0 / 3.0;
    let side = ring * 2f64.sqrt();
    for i in 1..5 {
        let next = 1 + i % 4;
        assert!((rrhs[i].distance(&rrhs[next]) - side).abs() < 1e-9);
        assert!((rrhs[i].distance(&rrhs[1 + (i + 1) % 4]) - 2.0 * ring).abs() < 1e-9);
    }
}

#[test]
fn noise_power_follows_subcarrier_width() {
    let (s64, _) = ScenarioConfig::default().realize(1).unwrap();
    assert!((noise_power(&s64) - 6.25e-16).abs() < 1e-28);
    let one = ScenarioConfig { num_users: 1, num_subcarriers: 1, ..ScenarioConfig::default() };
    let (s1, _) = one.realize(1).unwrap();
    assert!((noise_power(&s1) - 4e-21 * 1e7).abs() < 1e-25);
    let half = ScenarioConfig { num_subcarriers: 32, ..ScenarioConfig::default() };
    let (s32, _) = half.realize(1).unwrap();
    assert!((noise_power(&s32) / noise_power(&s64) - 2.0).abs() < 1e-12);
}

#[test]
fn path_loss_slope() {
    let pl = PathLoss::default();
    for d in [20.0, 100.0, 333.0] {
        let ratio = pl.linear_gain(2.0 * d) / pl.linear_gain(d);
        assert!((ratio - 2f64.powf(-3.76)).abs() < 1e-12);
    }
    assert!((pl.linear_gain(1000.0) - 10f64.powf(-12.81)).abs() < 1e-25);
}

#[test]
fn gains_shrink_with_distance_under_identical_draws() {
    let (mut scenario, _) = ScenarioConfig { num_users: 1, num_rrhs: 1, ..ScenarioConfig::default() }.realize(5).unwrap();
    let mut last: Option<Vec<f64>> = None;
    for d in [10.0, 25.0, 80.0, 200.0, 430.0] {
        scenario.user_positions[0] = Point { x: d, y: 0.0 };
        let g = generate_channel(&scenario, &mut ChaCha8Rng::seed_from_u64(9)).unwrap().gains().to_vec();
        if let Some(prev) = &last {
            assert!(g.iter().zip(prev).all(|(a, b)| a < b));
        }
        last = Some(g);
    }
}

#[test]
fn shadowing_spread_matches_configuration() {
    for (spread, expected) in [(ShadowingSpread::StdDev, 8.0), (ShadowingSpread::Variance, 8f64.sqrt())] {
        let channel = ChannelModel { shadowing_db: 8.0, shadowing_spread: spread, ..ChannelModel::flat() };
        let config = ScenarioConfig { num_users: 10, num_subcarriers: 10, num_rrhs: 4, channel, ..ScenarioConfig::default() };
        let mut db = Vec::new();
        for seed in 0..300 {
            let (_, tensor) = config.realize(seed).unwrap();
            for k in 0..10 {
                for r in 0..4 {
                    db.push(10.0 * tensor.gain(k, 0, r).log10());
                    // One draw per link, shared by every subcarrier.
                    assert_eq!(tensor.gain(k, 0, r), tensor.gain(k, 9, r));
                }
            }
        }
        assert!(db.len() >= 10_000);
        let std = sample_std(&db);
        assert!((std - expected).abs() <= 0.3, "{spread:?}: {std}");
    }
}

#[test]
fn fading_has_unit_mean_power_and_frequency_memory() {
    let model = ChannelModel::default();
    let taps = model.tap_powers().unwrap();
    assert!((taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let delay = |l: usize| l as f64 * model.tap_spacing_s;
    let mean_delay: f64 = taps.iter().enumerate().map(|(l, p)| p * delay(l)).sum();
    let second: f64 = taps.iter().enumerate().map(|(l, p)| p * delay(l).powi(2)).sum();
    assert!(((second - mean_delay * mean_delay).sqrt() - 500e-9).abs() < 1e-12);
    let spacing = 10e6 / 64.0;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut n0, mut n1, mut half) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..10_000 {
        let f = frequency_response(&taps, model.tap_spacing_s, 64, spacing, &mut rng);
        n0.push(f[0].norm_sqr());
        n1.push(f[1].norm_sqr());
        half.push(f[32].norm_sqr());
    }
    let mean = n0.iter().sum::<f64>() / n0.len() as f64;
    assert!((mean - 1.0).abs() < 0.02, "mean |F|^2 {mean}");
    let adjacent = correlation(&n0, &n1);
    let far = correlation(&n0, &half);
    assert!(adjacent > far + 0.2, "adjacent {adjacent}, far {far}");
}

#[test]
fn flat_mode_gives_identical_subcarriers() {
    let config = ScenarioConfig { channel: ChannelModel::flat(), ..ScenarioConfig::default() };
    let (_, tensor) = config.realize(4).unwrap();
    for k in 0..15 {
        for r in 0..4 {
            assert!((0..64).all(|n| tensor.gain(k, n, r) == 1.0));
        }
    }
}

#[test]
fn realization_is_deterministic() {
    let config = ScenarioConfig::default();
    let (a, ta) = config.realize(77).unwrap();
    let (b, tb) = config.realize(77).unwrap();
    assert_eq!(a.user_positions, b.user_positions);
    assert_eq!(ta.gains(), tb.gains());
    assert_eq!(ta.checksum(), tb.checksum());
    let (_, tc) = config.realize(78).unwrap();
    assert_ne!(ta.checksum(), tc.checksum());
    assert!(ta.gains().iter().all(|g| g.is_finite() && *g > 0.0));
}

#[test]
fn channel_dump_round_trips() {
    let (_, tensor) = ScenarioConfig { num_users: 3, num_subcarriers: 8, ..ScenarioConfig::default() }.realize(2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("channel.csv");
    tensor.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let back = ChannelTensor::from_csv(&text, tensor.noise_power_w, tensor.bandwidth_hz).unwrap();
    assert_eq!(back, tensor);
}

#[test]
fn invalid_configurations_are_refused() {
    assert!(ScenarioConfig { num_users: 65, ..ScenarioConfig::default() }.validate().is_err());
    assert!(ScenarioConfig { num_rrhs: 0, ..ScenarioConfig::default() }.validate().is_err());
    assert!(ScenarioConfig { rate_demand_bps: 0.0, ..ScenarioConfig::default() }.validate().is_err());
    assert!(ScenarioConfig::from_toml_str("num_users = 4\nbogus = 1").is_err());
    let parsed = ScenarioConfig::from_toml_str("num_users = 4\nseed = 9\n[channel]\nshadowing_spread = \"variance\"").unwrap();
    assert_eq!(parsed.num_users, 4);
    assert_eq!(parsed.channel.shadowing_spread, ShadowingSpread::Variance);
}
