use actipipe::calibration::{apply_calibration, fit_calibration, CalibrationError, CalibrationModel, FitOptions};
use actipipe::wire::{RawSample, RawSampleStream, Source, Units};
use proptest::prelude::*;

fn still(mv: [f64; 3], n: usize, wobble: f64) -> RawSampleStream {
    let mut s = RawSampleStream::new(Source::Csv, Units::Mv);
    s.samples = (0..n)
        .map(|i| {
            // deterministic zero-mean wobble
            let d = if i % 2 == 0 { wobble } else { -wobble };
            RawSample {
                node_id: 0,
                timestamp_ms: i as u32 * 20,
                axes: mv.map(|v| v + d),
            }
        })
        .collect();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Two noiseless postures recover the offsets and the gravity-axis scale.
    #[test]
    fn recovers_affine_model(
        offsets in prop::array::uniform3(1400.0f64..1900.0),
        scale in 150.0f64..260.0,
        wobble in 0.0f64..5.0,
    ) {
        let up = still([offsets[0], offsets[1], offsets[2] + scale], 200, wobble);
        let down = still([offsets[0], offsets[1], offsets[2] - scale], 200, wobble);
        let m = fit_calibration(&up, &down, &FitOptions::default()).unwrap();
        for (axis, offset) in m.axes.iter().zip(offsets) {
            prop_assert!((axis.offset_mv - offset).abs() < 1e-9);
            prop_assert!((axis.scale_mv_per_g - scale).abs() < 1e-9);
        }
        prop_assert_eq!(m.metadata.unwrap().gravity_axis, 2);
        let g = apply_calibration(&m, [offsets[0], offsets[1], offsets[2] + scale]);
        prop_assert!(g[0].abs() < 1e-9 && g[1].abs() < 1e-9 && (g[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn to_g_inverts_to_mv(g in -6.0f64..6.0, offset in 1000.0f64..2000.0, scale in 50.0f64..400.0) {
        let mut m = CalibrationModel::nominal();
        m.axes[1].offset_mv = offset;
        m.axes[1].scale_mv_per_g = scale;
        prop_assert!((m.axes[1].to_g(m.axes[1].to_mv(g)) - g).abs() < 1e-12);
    }

    /// Calibration is affine: midpoints map to midpoints.
    #[test]
    fn calibration_is_affine(a in prop::array::uniform3(0.0f64..3300.0), b in prop::array::uniform3(0.0f64..3300.0)) {
        let m = CalibrationModel::nominal();
        let mid: [f64; 3] = std::array::from_fn(|k| 0.5 * (a[k] + b[k]));
        let (ga, gb, gm) = (apply_calibration(&m, a), apply_calibration(&m, b), apply_calibration(&m, mid));
        for k in 0..3 {
            prop_assert!((gm[k] - 0.5 * (ga[k] + gb[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn json_round_trip(offsets in prop::array::uniform3(1000.0f64..2000.0), scale in 100.0f64..300.0) {
        let up = still([offsets[0], offsets[1] + scale, offsets[2]], 150, 1.0);
        let down = still([offsets[0], offsets[1] - scale, offsets[2]], 150, 1.0);
        let m = fit_calibration(&up, &down, &FitOptions::default()).unwrap();
        let back = CalibrationModel::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }
}

#[test]
fn rejects_motion_short_windows_and_flat_spans() {
    let opts = FitOptions::default();
    let up = still([1650.0, 1650.0, 1850.0], 200, 0.0);
    let down = still([1650.0, 1650.0, 1450.0], 200, 0.0);
    assert!(matches!(
        fit_calibration(&still([1650.0, 1650.0, 1850.0], 99, 0.0), &down, &opts),
        Err(CalibrationError::TooShort { .. })
    ));
    assert!(matches!(
        fit_calibration(&up, &still([1650.0, 1650.0, 1450.0], 200, 40.0), &opts),
        Err(CalibrationError::NotStill { .. })
    ));
    assert!(matches!(
        fit_calibration(&up, &still([1650.0, 1650.0, 1846.0], 200, 0.0), &opts),
        Err(CalibrationError::DegenerateFit { .. })
    ));
    assert!(fit_calibration(&up, &down, &opts).is_ok());
}
