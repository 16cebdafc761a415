use std::f64::consts::PI;

use dhn_core::scenario::{
    lowpass, resample_to_grid, settling_length, synthesize_variations, LoadSeries, VariationConfig, DEFAULT_CUTOFF_HZ,
};
use dhn_core::thermal::TimeGrid;
use proptest::prelude::*;

fn daily(n: usize, amp: f64, phase: f64, offset: f64) -> LoadSeries {
    let v = (0..n)
        .map(|i| offset + amp * (2.0 * PI * i as f64 * 900.0 / 86_400.0 + phase).sin())
        .collect();
    LoadSeries::new(0.0, 900.0, v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resampling_is_exact_for_affine_series(
        a in -100.0..100.0f64,
        b in -1e-2..1e-2f64,
        knots in prop::collection::vec(1.0..5000.0f64, 2..30),
        dt in 60.0..1800.0f64,
    ) {
        let mut times = vec![0.0];
        for d in &knots {
            times.push(times.last().unwrap() + d);
        }
        let end = *times.last().unwrap();
        let steps = (end / dt).floor() as usize;
        prop_assume!(steps >= 1);
        let values: Vec<f64> = times.iter().map(|t| a + b * t).collect();
        let grid = TimeGrid::new(dt, steps).unwrap();
        let out = resample_to_grid(&times, &values, &grid).unwrap();
        for (k, v) in out.iter().enumerate() {
            let exact = a + b * grid.time(k);
            prop_assert!((v - exact).abs() <= 1e-9 * (1.0 + exact.abs()), "{v} vs {exact}");
        }
    }

    #[test]
    fn variations_hit_their_mean_targets(
        sigma in 0.0..0.5f64,
        seed in any::<u64>(),
        targets in prop::collection::vec(1e3..1e6f64, 1..6),
    ) {
        let base = daily(289, 30_000.0, 0.3, 100_000.0);
        let ids: Vec<String> = (0..targets.len()).map(|i| format!("c{i}")).collect();
        let cfg = VariationConfig { sigma, seed, ..VariationConfig::default() };
        let out = synthesize_variations(&base, &ids, &targets, &cfg).unwrap();
        for (s, t) in out.iter().zip(&targets) {
            prop_assert!((s.mean() - t).abs() <= 1e-9 * t);
            prop_assert!(s.values.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn lowpass_leaves_slow_signals_alone(
        modes in prop::collection::vec((1usize..=8, -3e4..3e4f64), 1..4),
        offset in 1e5..2e5f64,
    ) {
        // Sines with a whole number of half periods over the series vanish in
        // curvature at both ends, so the reflected padding keeps them smooth.
        // The fastest, a daily cycle, sits at a sixth of the cutoff, where one
        // zero-phase pass scales it by 1/(1 + (1/6)^8) ≈ 1 − 6e-7.
        let n = 4 * 96 + 1;
        let span = (n - 1) as f64 * 900.0;
        let v = (0..n)
            .map(|i| {
                let t = i as f64 * 900.0;
                offset + modes.iter().map(|(m, a)| a * (PI * *m as f64 * t / span).sin()).sum::<f64>()
            })
            .collect();
        let x = LoadSeries::new(0.0, 900.0, v).unwrap();
        let once = lowpass(&x, DEFAULT_CUTOFF_HZ).unwrap();
        let twice = lowpass(&once, DEFAULT_CUTOFF_HZ).unwrap();
        for (a, b) in once.values.iter().zip(&twice.values) {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn lowpass_is_idempotent_away_from_the_ends(
        amp in 0.0..5e4f64,
        phase in 0.0..(2.0 * PI),
        offset in 1e5..2e5f64,
    ) {
        let n = 4 * 96 + 1;
        let x = daily(n, amp, phase, offset);
        let once = lowpass(&x, DEFAULT_CUTOFF_HZ).unwrap();
        let twice = lowpass(&once, DEFAULT_CUTOFF_HZ).unwrap();
        let edge = settling_length(DEFAULT_CUTOFF_HZ, 900.0);
        for (a, b) in once.values[edge..n - edge].iter().zip(&twice.values[edge..n - edge]) {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
        }
    }
}

#[test]
fn lowpass_at_half_cutoff_scales_by_the_squared_magnitude() {
    let f = DEFAULT_CUTOFF_HZ / 2.0;
    let gain = 1.0 / (1.0 + 0.5f64.powi(8));
    let n = 8 * 96 + 1;
    let v: Vec<f64> = (0..n).map(|i| 1e5 + 1e4 * (2.0 * PI * f * i as f64 * 900.0).sin()).collect();
    let out = lowpass(&LoadSeries::new(0.0, 900.0, v).unwrap(), DEFAULT_CUTOFF_HZ).unwrap();
    // Interior samples only, away from the padded ends.
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for v in &out.values[n / 4..3 * n / 4] {
        hi = hi.max(*v);
        lo = lo.min(*v);
    }
    let amp = (hi - lo) / 2.0;
    assert!((amp / 1e4 - gain).abs() < 2e-3, "amplitude ratio {} vs {gain}", amp / 1e4);
}
