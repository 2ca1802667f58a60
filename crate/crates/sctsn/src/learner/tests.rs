use super::*;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> Vec<f64> {
    let path = format!(
        "{}/../../assets/traces/{name}.trace",
        env!("CARGO_MANIFEST_DIR")
    );
    load_trace(std::path::Path::new(&path)).unwrap()
}

fn bins_of(seq: &TimeSeq) -> Vec<u8> {
    (0..seq.len()).map(|i| u8::from(seq.get(i))).collect()
}

#[test]
fn time_sequence_basic_binning() {
    let seq = build_time_sequence(&[0.0, 50e-6, 100e-6], 25e-6).unwrap();
    assert_eq!(bins_of(&seq), vec![1, 0, 1, 0, 1]);
    assert_eq!(seq.origin(), 0.0);
}

#[test]
fn time_sequence_collapses_same_bin_arrivals() {
    let seq = build_time_sequence(&[0.0, 10e-6], 25e-6).unwrap();
    assert_eq!(seq.len(), 2); // ceil(10/25) + 1
    assert_eq!(seq.ones(), 1);
    assert!(seq.get(0));
}

#[test]
fn time_sequence_needs_two_arrivals() {
    assert!(matches!(
        build_time_sequence(&[1.0], 1e-6),
        Err(LearnerError::InsufficientData { .. })
    ));
}

#[test]
fn impulse_train_estimated_exactly() {
    let cfg = LearnerConfig::default();
    let ts: Vec<f64> = (0..100).map(|k| k as f64 * 50.0).collect();
    let est = estimate_period_with_bin(&ts, 1.0, &cfg).unwrap();
    assert!(est.valid);
    assert_eq!(est.period, 50.0);
    assert_eq!(est.confidence, 1.0);
    // With no missing frames the largest interarrival is the period itself.
    assert!(est.p_max >= est.period);
}

#[test]
fn missing_frame_trace_recovers_exact_period() {
    let cfg = LearnerConfig::default();
    let ts = fixture("missing_frame");
    let est = estimate_period(&ts, &cfg).unwrap();
    assert!(est.valid);
    assert!(
        (est.period - 200e-6).abs() <= est.bin_width,
        "got {}",
        est.period
    );
    assert!(
        (est.period - 200e-6).abs() < 1e-12,
        "expected exact recovery"
    );
    assert!(est.confidence >= 0.9);
    // The gap left by the missing frame dominates the interarrivals.
    assert!((est.p_max - 400e-6).abs() < 1e-12);
}

#[test]
fn delayed_frame_trace_recovers_exact_period() {
    let cfg = LearnerConfig::default();
    let ts = fixture("delayed_frame");
    let est = estimate_period(&ts, &cfg).unwrap();
    assert!(est.valid);
    assert!((est.period - 50e-6).abs() < 1e-12, "got {}", est.period);
    assert!(est.confidence >= 0.8);
}

#[test]
fn rate_change_trace_windowed_vs_mean_baseline() {
    let cfg = LearnerConfig::default();
    let ts = fixture("rate_change");
    let baseline = mean_interarrival(&ts).unwrap();
    assert!((baseline - 62e-6).abs() < 1e-12);
    // Windowed on the recent regime the estimator tracks the new period.
    let recent = &ts[ts.len() - 16..];
    let est = estimate_period(recent, &cfg).unwrap();
    assert!(est.valid);
    assert!((est.period - 25e-6).abs() < 1e-12, "got {}", est.period);
}

#[test]
fn estimates_are_deterministic() {
    let cfg = LearnerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut ts = Vec::new();
    let mut t = 0.0;
    for _ in 0..64 {
        t += rng.gen_range(0.5e-3..2e-3);
        ts.push(t);
    }
    let a = estimate_period(&ts, &cfg).unwrap();
    let b = estimate_period(&ts, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimate_shift_invariant() {
    let cfg = LearnerConfig::default();
    let ts = fixture("missing_frame");
    let shifted: Vec<f64> = ts.iter().map(|t| t + 3.5).collect();
    let a = estimate_period(&ts, &cfg).unwrap();
    let b = estimate_period(&shifted, &cfg).unwrap();
    assert_eq!(a.valid, b.valid);
    assert!((a.period - b.period).abs() < 1e-12);
}

#[test]
fn estimate_scale_covariant() {
    let cfg = LearnerConfig::default();
    let ts = fixture("delayed_frame");
    let scale = 8.0;
    let scaled: Vec<f64> = ts.iter().map(|t| t * scale).collect();
    let base_bin = adaptive_bin_width(&ts, &cfg);
    let a = estimate_period_with_bin(&ts, base_bin, &cfg).unwrap();
    let b = estimate_period_with_bin(&scaled, base_bin * scale, &cfg).unwrap();
    assert!(a.valid && b.valid);
    assert!((b.period - a.period * scale).abs() < 1e-12);
}

#[test]
fn periodic_stream_classified_tt_at_n_min() {
    let cfg = LearnerConfig::default();
    let mut obs = StreamObservation::new(1, cfg.clone());
    let mut verdict_at = None;
    for k in 0..40u64 {
        let t = k as f64 * 10e-3;
        if let Some(Transition::ClassifiedTt(est)) = obs.record_arrival(t).unwrap() {
            verdict_at = Some((k + 1, est));
            break;
        }
    }
    let (count, est) = verdict_at.expect("periodic stream must classify TT");
    assert_eq!(count, cfg.n_min as u64);
    assert!((est.period - 10e-3).abs() <= est.bin_width);
}

#[test]
fn exponential_streams_classified_be() {
    let cfg = LearnerConfig::default();
    let mut be = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let exp = rand_distr::Exp::new(1.0 / 0.1).unwrap();
        let mut obs = StreamObservation::new(seed, cfg.clone());
        let mut t = 0.0;
        for _ in 0..cfg.window {
            t += rng.sample::<f64, _>(exp);
            obs.record_arrival(t).unwrap();
        }
        if obs.class() == StreamClass::Be {
            be += 1;
        }
    }
    assert!(be >= 90, "only {be} of 100 exponential streams ended BE");
}

#[test]
fn three_frames_is_undecided() {
    let cfg = LearnerConfig::default();
    let mut obs = StreamObservation::new(1, cfg);
    for k in 0..3u64 {
        obs.record_arrival(k as f64 * 1e-3).unwrap();
    }
    assert_eq!(obs.class(), StreamClass::Undecided);
    assert!(matches!(
        estimate_period(&[0.0, 1e-3, 2e-3], &LearnerConfig::default()),
        Err(LearnerError::InsufficientData { .. })
    ));
}

/// Classified stream state for deviation tests: 40 clean arrivals at the
/// given period.
fn classified_tt(period: f64, cfg: &LearnerConfig) -> (StreamObservation, f64) {
    let mut obs = StreamObservation::new(9, cfg.clone());
    let mut t = 0.0;
    for _ in 0..40 {
        obs.record_arrival(t).unwrap();
        t += period;
    }
    assert_eq!(obs.class(), StreamClass::Tt);
    (obs, t)
}

#[test]
fn jittered_continuation_does_not_relearn() {
    let cfg = LearnerConfig::default();
    let period = 50e-6;
    let (mut obs, start) = classified_tt(period, &cfg);
    let bin = obs.estimate().unwrap().bin_width;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..64u64 {
        let t = start + k as f64 * period + rng.gen_range(0.0..bin);
        assert_eq!(obs.record_arrival(t).unwrap(), None, "arrival {k}");
    }
    assert_eq!(obs.class(), StreamClass::Tt);
}

#[test]
fn one_missing_frame_does_not_relearn() {
    let cfg = LearnerConfig::default();
    let period = 50e-6;
    let (mut obs, start) = classified_tt(period, &cfg);
    for k in 0..32u64 {
        if k == 5 {
            continue;
        }
        let t = start + k as f64 * period;
        assert_eq!(obs.record_arrival(t).unwrap(), None);
    }
    assert_eq!(obs.class(), StreamClass::Tt);
}

#[test]
fn halved_period_triggers_relearn_within_one_window() {
    let cfg = LearnerConfig::default();
    let period = 50e-6;
    let (mut obs, start) = classified_tt(period, &cfg);
    let mut relearned_at = None;
    for k in 0..cfg.deviation_window as u64 {
        let t = start + k as f64 * period / 2.0;
        if obs.record_arrival(t).unwrap() == Some(Transition::Relearn) {
            relearned_at = Some(k + 1);
            break;
        }
    }
    let at = relearned_at.expect("halved period must trigger re-learning");
    assert!(at <= cfg.deviation_window as u64);
    assert_eq!(obs.class(), StreamClass::Undecided);
    // And the stream re-classifies at the new period afterwards.
    let mut t = start + (at - 1) as f64 * period / 2.0;
    let mut verdict = None;
    for _ in 0..2 * cfg.window {
        t += period / 2.0;
        if let Some(Transition::ClassifiedTt(est)) = obs.record_arrival(t).unwrap() {
            verdict = Some(est);
            break;
        }
    }
    let est = verdict.expect("stream must re-classify at the new period");
    assert!((est.period - period / 2.0).abs() <= est.bin_width);
}

#[test]
fn be_streams_reexamined_on_window_refill() {
    // A stream that starts noisy and then turns periodic is promoted.
    let cfg = LearnerConfig::default();
    let mut obs = StreamObservation::new(3, cfg.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut t = 0.0;
    for _ in 0..cfg.window {
        t += rng.gen_range(0.5e-3..9e-3);
        obs.record_arrival(t).unwrap();
    }
    assert_eq!(obs.class(), StreamClass::Be);
    let mut became_tt = false;
    for _ in 0..3 * cfg.window {
        t += 2e-3;
        if let Some(Transition::ClassifiedTt(_)) = obs.record_arrival(t).unwrap() {
            became_tt = true;
            break;
        }
    }
    assert!(became_tt, "periodic turn must promote the stream");
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

        /// Impulse trains with a few missing frames are recovered to within
        /// one bin even at coarse quantization.
        #[test]
        fn robust_to_missing_frames(period_bins in 2usize..=16, seed in 0u64..500) {
            let cfg = LearnerConfig::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 64usize;
            let missing = n / 20; // 5%
            let mut drop: Vec<usize> = (1..n).collect();
            drop.shuffle(&mut rng);
            let drop: std::collections::BTreeSet<usize> =
                drop.into_iter().take(missing).collect();
            let ts: Vec<f64> = (0..n)
                .filter(|k| !drop.contains(k))
                .map(|k| k as f64 * period_bins as f64)
                .collect();
            let est = estimate_period_with_bin(&ts, 1.0, &cfg).unwrap();
            prop_assert!(est.valid, "no period found for P={period_bins} seed={seed}");
            prop_assert!(
                (est.period - period_bins as f64).abs() <= 1.0,
                "P={period_bins} got {}",
                est.period
            );
        }

        /// With half-bin jitter added the bound holds from four bins per
        /// period upward. Below that, jitter splits the spectral comb
        /// across adjacent bin phases (amplitude factor |1+e^{2pi i/P}|/2,
        /// zero at P=2) and no estimator bound can hold; the adaptive bin
        /// policy always quantizes near four bins per period, so smaller
        /// ratios do not arise from it.
        #[test]
        fn robust_to_missing_and_jitter(period_bins in 4usize..=16, seed in 0u64..500) {
            let cfg = LearnerConfig::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 64usize;
            let missing = n / 20; // 5%
            let mut drop: Vec<usize> = (1..n).collect();
            drop.shuffle(&mut rng);
            let drop: std::collections::BTreeSet<usize> =
                drop.into_iter().take(missing).collect();
            let ts: Vec<f64> = (0..n)
                .filter(|k| !drop.contains(k))
                .map(|k| k as f64 * period_bins as f64 + rand::Rng::gen_range(&mut rng, 0.0..0.5))
                .collect();
            let est = estimate_period_with_bin(&ts, 1.0, &cfg).unwrap();
            prop_assert!(est.valid, "no period found for P={period_bins} seed={seed}");
            prop_assert!(
                (est.period - period_bins as f64).abs() <= 1.0,
                "P={period_bins} got {}",
                est.period
            );
        }

        /// Scaling timestamps and the bin width together scales the period.
        #[test]
        fn scale_covariance(scale in 0.25f64..64.0, seed in 0u64..100) {
            let cfg = LearnerConfig::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let period = rand::Rng::gen_range(&mut rng, 4.0..12.0f64).round();
            let ts: Vec<f64> = (0..32).map(|k| k as f64 * period).collect();
            let scaled: Vec<f64> = ts.iter().map(|t| t * scale).collect();
            let a = estimate_period_with_bin(&ts, 1.0, &cfg).unwrap();
            let b = estimate_period_with_bin(&scaled, scale, &cfg).unwrap();
            prop_assert_eq!(a.valid, b.valid);
            if a.valid {
                prop_assert!((b.period - a.period * scale).abs() < 1e-9 * scale);
            }
        }
    }
}
