use std::f64::consts::{PI, TAU};

use gdbf_core::beamforming::{gain, weights_feedback_ideal, weights_random, wrap_phase, WeightVector};
use gdbf_core::geometry::{path_mismatch, separation_bound, Position3};
use gdbf_core::protocol::{
    apply_impairments, estimate_toa, gen_sync_preamble, rotate, Impairment, ProtocolConfig, SubsampleMethod,
};
use gdbf_core::seed::TrialSeed;
use num_complex::Complex64;
use proptest::prelude::*;

fn channels(raw: &[(f64, f64)]) -> Vec<Complex64> {
    raw.iter().map(|&(m, p)| Complex64::from_polar(m, p)).collect()
}

proptest! {
    #[test]
    fn separation_bound_keeps_mismatch_below_delta(ly in 0.01f64..20.0, delta in 0.001f64..2.0, frac in 0.0f64..1.0) {
        let dx = separation_bound(ly, delta).unwrap();
        prop_assert!(dx >= 0.0);
        // the worst follower sits at the near corner of the rectangle
        let corner = Position3::planar(-dx, ly / 2.0);
        prop_assert!(path_mismatch(&corner) <= delta * (1.0 + 1e-9));
        let inner = Position3::planar(-dx - frac, ly / 2.0 * frac);
        prop_assert!(path_mismatch(&inner) <= delta * (1.0 + 1e-9));
    }

    #[test]
    fn separation_bound_is_zero_when_delta_covers_half_width(ly in 0.0f64..4.0, extra in 0.0f64..1.0) {
        prop_assert_eq!(separation_bound(ly, ly / 2.0 + extra).unwrap(), 0.0);
    }

    #[test]
    fn gain_stays_in_unit_interval(
        raw in prop::collection::vec((0.01f64..3.0, -PI..PI), 1..20),
        phases in prop::collection::vec(-PI..PI, 20),
    ) {
        let h = channels(&raw);
        let w = WeightVector::from_phases(phases[..h.len()].to_vec());
        let g = gain(&w, &h).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&g));
    }

    #[test]
    fn ideal_weights_are_coherent(raw in prop::collection::vec((0.01f64..3.0, -PI..PI), 1..20)) {
        let h = channels(&raw);
        prop_assert!((gain(&weights_feedback_ideal(&h), &h).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn common_rotation_leaves_gain_unchanged(
        raw in prop::collection::vec((0.01f64..3.0, -PI..PI), 2..12),
        alpha in -PI..PI,
        seed in any::<u64>(),
    ) {
        let h = channels(&raw);
        let mut rng = TrialSeed::derive(seed, "prop", "", 0).stream("random");
        let w = weights_random(h.len(), &mut rng).unwrap();
        let a = gain(&w, &h).unwrap();
        let b = gain(&w.rotated(alpha), &h).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn residual_cfo_drifts_linearly(eps in -50.0f64..50.0, n in 2usize..5000) {
        let fs = 1e6;
        let mut x = vec![Complex64::new(1.0, 0.0); n];
        rotate(&mut x, eps, 0.0, fs);
        let t = (n - 1) as f64 / fs;
        let measured = (x[n - 1] * x[0].conj()).arg();
        prop_assert!(wrap_phase(measured - TAU * eps * t).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn toa_tracks_any_fractional_delay(dt in 0.0f64..20.0) {
        let cfg = ProtocolConfig::default();
        let sync = gen_sync_preamble(&cfg);
        let frame = sync.padded(40, 40);
        let imp = Impairment { timing_offset_s: dt * cfg.sample_period(), ..Impairment::none() };
        let rx = apply_impairments(&frame, &imp, &mut TrialSeed::derive(0, "prop", "", 0).stream("noise"));
        let int = estimate_toa(&rx, &sync, SubsampleMethod::Interpolated, cfg.toa_detect_threshold).unwrap();
        prop_assert!((int.lag - 40.0 - dt).abs() < 0.05, "interpolated {} vs {}", int.lag - 40.0, dt);
        let quad = estimate_toa(&rx, &sync, SubsampleMethod::Quadratic, cfg.toa_detect_threshold).unwrap();
        prop_assert!((quad.lag - 40.0 - dt).abs() < 0.5, "quadratic {} vs {}", quad.lag - 40.0, dt);
    }
}
