use std::f64::consts::{PI, TAU};

use fidtwin::dsp::{analytic_signal, power_spectrum, unwrap_phase, Bandpass, FilterSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn analytic_real_part_is_input(n in 16usize..3000, seed in any::<u64>()) {
        let x = white(n, seed);
        let a = analytic_signal(&x, 1e4, 0.0);
        prop_assert_eq!(a.len(), n);
        for (z, v) in a.samples.iter().zip(&x) {
            prop_assert!((z.re - v).abs() < 1e-10);
        }
    }

    #[test]
    fn unwrap_recovers_linear_phase(f in 50.0f64..4000.0, phi0 in -PI..PI) {
        let fs = 1e4;
        let n = 4096;
        let x: Vec<f64> = (0..n).map(|i| (TAU * f * i as f64 / fs + phi0).cos()).collect();
        let p = unwrap_phase(&analytic_signal(&x, fs, 0.0));
        // the periodic extension distorts the ends, so judge the central half
        let (a, b) = (n / 4, 3 * n / 4);
        prop_assert!(p.discontinuities.iter().all(|&i| i < a || i > b));
        let slope = (p.values[b] - p.values[a]) * fs / (b - a) as f64;
        prop_assert!((slope / TAU - f).abs() < 0.05 * fs / n as f64 + 1e-3);
    }

    #[test]
    fn welch_integrates_to_variance(seed in any::<u64>(), sigma in 0.1f64..10.0) {
        let fs = 2e4;
        let x: Vec<f64> = white(1 << 16, seed).into_iter().map(|v| v * sigma).collect();
        let s = power_spectrum(&x, fs, 20.0).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        prop_assert!((s.total_power() / var - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_phase_filter_is_time_symmetric(seed in any::<u64>()) {
        let fs = 1e5;
        let bp = Bandpass::design(&FilterSpec::centered(10e3, 2e3), fs).unwrap();
        let x = white(20_000, seed);
        let rev: Vec<f64> = x.iter().rev().cloned().collect();
        let y = bp.apply(&x).unwrap();
        let mut y_rev = bp.apply(&rev).unwrap();
        y_rev.reverse();
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let worst = y.iter().zip(&y_rev).skip(2000).take(16_000).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(worst < 1e-8 * scale);
    }
}

#[test]
fn enbw_matches_white_noise_variance() {
    let fs = 5e5;
    for (centre, width) in [(60e3, 500.0), (60e3, 5e3)] {
        let bp = Bandpass::design(&FilterSpec::centered(centre, width), fs).unwrap();
        let y = bp.apply(&white(1 << 21, 9)).unwrap();
        let edge = 50_000;
        let var = y[edge..y.len() - edge].iter().map(|v| v * v).sum::<f64>() / (y.len() - 2 * edge) as f64;
        let measured = var * fs / 2.0;
        let enbw = bp.equivalent_noise_bandwidth();
        assert!((measured / enbw - 1.0).abs() < 0.03, "{width}: {measured} vs {enbw}");
    }
}
