mod common;

use std::f64::consts::TAU;

use actipipe::dsp::{average_power, median_frequency, welch_psd, WelchParams, Window};
use common::{flat_grid, hann, max_rel_err, periodogram, tone};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FS: f64 = 50.0;

#[test]
fn single_rectangular_segment_is_the_periodogram() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let n = [64, 100, 127, 128, 256][case % 5];
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let params = WelchParams {
            segment_len: n,
            overlap: 0.0,
            window: Window::Rectangular,
        };
        let psd = welch_psd(&x, FS, &params).unwrap();
        assert_eq!(psd.segments, 1);
        let oracle = periodogram(&x, &vec![1.0; n], FS);
        let err = max_rel_err(&psd.pxx, &oracle);
        assert!(err < 1e-10, "case {case} (n = {n}): {err}");
    }
}

#[test]
fn hann_welch_is_mean_of_segment_periodograms() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
    let psd = welch_psd(&x, FS, &WelchParams::default()).unwrap();
    assert_eq!(psd.segments, 3);
    let w = hann(128);
    let mut oracle = vec![0.0; 65];
    for s in 0..3 {
        for (o, p) in oracle.iter_mut().zip(periodogram(&x[s * 64..s * 64 + 128], &w, FS)) {
            *o += p / 3.0;
        }
    }
    assert!(max_rel_err(&psd.pxx, &oracle) < 1e-10);
}

#[test]
fn parseval_on_white_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = Normal::new(0.0, 0.7).unwrap();
    let x: Vec<f64> = (0..60 * 50).map(|_| normal.sample(&mut rng)).collect();
    let mean_square = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let psd = welch_psd(&x, FS, &WelchParams::default()).unwrap();
    let ratio = psd.total_power() / mean_square;
    assert!((ratio - 1.0).abs() < 0.10, "{ratio}");
    // the averaged form is a fixed multiple of the integral
    let k = average_power(&psd) / psd.total_power();
    assert!((k - 128.0 / 65.0).abs() < 1e-12, "{k}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn psd_is_non_negative(x in proptest::collection::vec(-5.0f64..5.0, 128..600)) {
        let psd = welch_psd(&x, FS, &WelchParams::default()).unwrap();
        prop_assert!(psd.pxx.iter().all(|&p| p >= 0.0));
        prop_assert_eq!(psd.segments, (x.len() - 128) / 64 + 1);
    }

    #[test]
    fn median_frequency_power_of_two_scale_is_exact(
        p in proptest::collection::vec(0.0f64..10.0, 65),
        e in -40i32..40,
    ) {
        prop_assume!(p.iter().any(|&v| v > 0.0));
        let c = 2f64.powi(e);
        let a = median_frequency(&flat_grid(p.clone(), FS)).unwrap();
        let b = median_frequency(&flat_grid(p.iter().map(|v| v * c).collect(), FS)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn median_frequency_any_scale(
        p in proptest::collection::vec(0.0f64..10.0, 65),
        c in 1e-6f64..1e6,
    ) {
        prop_assume!(p.iter().any(|&v| v > 0.0));
        let a = median_frequency(&flat_grid(p.clone(), FS)).unwrap();
        let b = median_frequency(&flat_grid(p.iter().map(|v| v * c).collect(), FS)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn median_frequency_in_range(p in proptest::collection::vec(0.0f64..10.0, 65)) {
        prop_assume!(p.iter().any(|&v| v > 0.0));
        let f = median_frequency(&flat_grid(p, FS)).unwrap();
        prop_assert!((0.0..=FS / 2.0).contains(&f));
    }

    #[test]
    fn single_tone_recovered(f in 1.0f64..23.0, a in 0.01f64..3.0, phase in 0.0f64..TAU) {
        let psd = welch_psd(&tone(f, a, phase, 256, FS), FS, &WelchParams::default()).unwrap();
        let fm = median_frequency(&psd).unwrap();
        prop_assert!((fm - f).abs() <= FS / 128.0, "tone {} Hz, fm {} Hz", f, fm);
    }

    #[test]
    fn two_equal_tones_bracket_median(
        f1 in 1.0f64..11.0,
        gap in 1.0f64..11.0,
        a in 0.1f64..2.0,
        p1 in 0.0f64..TAU,
        p2 in 0.0f64..TAU,
    ) {
        let f2 = f1 + gap;
        let x: Vec<f64> = tone(f1, a, p1, 256, FS).iter().zip(tone(f2, a, p2, 256, FS)).map(|(u, v)| u + v).collect();
        let psd = welch_psd(&x, FS, &WelchParams::default()).unwrap();
        let fm = median_frequency(&psd).unwrap();
        let df = FS / 128.0;
        prop_assert!(fm >= f1 - df && fm <= f2 + df, "tones {} / {} Hz, fm {} Hz", f1, f2, fm);
    }
}
