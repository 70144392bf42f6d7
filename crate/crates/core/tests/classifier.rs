use actipipe::classifier::{fit_thresholds, ActivityLabel, ClassifierConfig};
use actipipe::features::FeatureVector;
use actipipe::pipeline::{training_set, PipelineConfig};
use actipipe::synth::{generate_corpus, CorpusOptions};
use proptest::prelude::*;
use ActivityLabel::*;

fn rank(l: ActivityLabel) -> f64 {
    match l {
        Rest => 0.0,
        Walk => 1.0,
        Unknown => 1.5,
        Run => 2.0,
    }
}

fn config() -> impl Strategy<Value = ClassifierConfig> {
    (0.05f64..0.5, 1.2f64..5.0, 0.0f64..0.6, 1.0f64..10.0).prop_map(|(th1, ratio, delta, fm)| {
        ClassifierConfig {
            th1_sma_g: th1,
            th2_sma_g: th1 * ratio / (1.0 - delta).max(0.4),
            ambiguity_fraction: delta,
            fm_threshold_hz: fm,
            window_s: 1.0,
        }
    })
}

fn fv(t: u64, sma_g: f64, fm_hz: Option<f64>) -> FeatureVector {
    FeatureVector {
        window_start_ms: t * 1000,
        sma_g,
        fm_hz,
        sample_count: 50,
        partial: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// With f_m held fixed, more activity never yields a calmer label.
    #[test]
    fn monotone_in_sma(cfg in config(), a in 0.0f64..4.0, b in 0.0f64..4.0, fm in proptest::option::of(0.5f64..12.0)) {
        prop_assume!(cfg.validate(50.0).is_ok());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rank(cfg.decide(lo, fm)) <= rank(cfg.decide(hi, fm)));
    }

    /// Rescaling SMA and both thresholds together changes nothing.
    #[test]
    fn scale_invariant(cfg in config(), sma in 0.0f64..4.0, fm in proptest::option::of(0.5f64..12.0), k in 0.1f64..10.0) {
        prop_assume!(cfg.validate(50.0).is_ok());
        let scaled = ClassifierConfig {
            th1_sma_g: cfg.th1_sma_g * k,
            th2_sma_g: cfg.th2_sma_g * k,
            ..cfg
        };
        // keep clear of the boundaries, where rounding of the products decides
        let (lo, hi) = cfg.band();
        let near = |t: f64| (sma - t).abs() <= 1e-9 * t;
        prop_assume!(!near(cfg.th1_sma_g) && !near(lo) && !near(hi));
        prop_assert_eq!(cfg.decide(sma, fm), scaled.decide(sma * k, fm));
    }

    /// Rest is decided by SMA alone and movement never comes out as Rest.
    #[test]
    fn rest_only_below_th1(cfg in config(), sma in 0.0f64..4.0, fm in proptest::option::of(0.5f64..12.0)) {
        prop_assume!(cfg.validate(50.0).is_ok());
        prop_assert_eq!(cfg.decide(sma, fm) == Rest, sma < cfg.th1_sma_g);
    }

    #[test]
    fn json_round_trip(cfg in config()) {
        prop_assume!(cfg.validate(50.0).is_ok());
        prop_assert_eq!(ClassifierConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
    }

    /// Separable classes are fitted without training error.
    #[test]
    fn fit_separates_separable_data(
        rest in proptest::collection::vec(0.0f64..0.1, 3..30),
        walk in proptest::collection::vec(0.3f64..0.6, 3..30),
        run in proptest::collection::vec(1.0f64..2.0, 3..30),
    ) {
        let mut data = Vec::new();
        for (values, label, fm) in [(&rest, Rest, 0.5), (&walk, Walk, 2.6), (&run, Run, 3.8)] {
            for (i, &s) in values.iter().enumerate() {
                data.push((fv(i as u64, s, Some(fm)), label));
            }
        }
        let cfg = fit_thresholds(&data).unwrap();
        for (f, l) in &data {
            prop_assert_eq!(cfg.decide(f.sma_g, f.fm_hz), *l);
        }
    }
}

#[test]
fn threshold_decision_tree() {
    let cfg = ClassifierConfig {
        th1_sma_g: 0.2,
        th2_sma_g: 1.0,
        ambiguity_fraction: 0.2,
        fm_threshold_hz: 3.2,
        window_s: 1.0,
    };
    assert_eq!(cfg.decide(0.1, None), Rest);
    assert_eq!(cfg.decide(0.5, Some(4.5)), Walk);
    assert_eq!(cfg.decide(1.5, Some(2.0)), Run);
    assert_eq!(cfg.decide(1.1, Some(3.6)), Run);
    assert_eq!(cfg.decide(0.9, Some(2.7)), Walk);
    assert_eq!(cfg.decide(1.0, None), Unknown);
}

/// The shipped defaults are exactly what the documented fit produces.
#[test]
fn shipped_config_is_reproducible() {
    let corpus = generate_corpus(&CorpusOptions::overlap_stressed(), 101).unwrap();
    let training = training_set(&corpus, &PipelineConfig::default(), 6).unwrap();
    let refit = fit_thresholds(&training).unwrap();
    assert_eq!(refit, ClassifierConfig::default());
}
