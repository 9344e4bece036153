use std::f64::consts::PI;
use std::sync::OnceLock;

use morpi::calib::{apply_calibration, auto_calibrate, CalibConfig, CalibMode, CalibResult};
use morpi::errmodel::{ins_error_2d, ins_error_3d, morpi_error, transition_matrix, ErrorInputs, Matrix15};
use morpi::ingest::{detect_stationary, parse_imu_log, write_imu_log, FormatConfig, StationaryConfig};
use morpi::morpi::{dead_reckon, run_morpi, weinberg_distance, MorpiConfig, MorpiMode, MorpiTrack, WeinbergGain};
use morpi::simgen::{corrupt, generate_truth, imu_from_truth, TrajectorySpec};
use morpi::strapdown::propagate_attitude;
use morpi::types::orthonormality_error;
use morpi::{ImuSample, ImuSequence, SensorSpec};
use nalgebra::{Matrix3, Vector2, Vector3};
use proptest::prelude::*;

fn sine_imu() -> &'static ImuSequence {
    static SEQ: OnceLock<ImuSequence> = OnceLock::new();
    SEQ.get_or_init(|| {
        let truth = generate_truth(&TrajectorySpec::sine(6.3, 0.1, 1.0, 0.45)).unwrap();
        imu_from_truth(&truth, 9.81).unwrap()
    })
}

fn base_track(mode: MorpiMode) -> &'static MorpiTrack {
    static A: OnceLock<MorpiTrack> = OnceLock::new();
    static G: OnceLock<MorpiTrack> = OnceLock::new();
    let cell = if mode == MorpiMode::A { &A } else { &G };
    cell.get_or_init(|| {
        let gain = WeinbergGain::new(1.0, mode).unwrap();
        run_morpi(sine_imu(), mode, CalibMode::Rd, &gain, &MorpiConfig::default()).unwrap()
    })
}

fn vec3(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn mode() -> impl Strategy<Value = MorpiMode> {
    prop_oneof![Just(MorpiMode::A), Just(MorpiMode::G)]
}

/// Inputs whose horizontal velocity, accelerometer and tilt terms share one
/// direction, plus an arbitrary vertical component and yaw-rate bias.
fn aligned_inputs() -> impl Strategy<Value = ErrorInputs> {
    (0.0..2.0 * PI, 0.0..0.2_f64, 0.0..0.6_f64, 0.0..0.1_f64, -0.5..0.5_f64, -0.05..0.05_f64).prop_map(|(th, dv, ba, tilt, ba_up, bgz)| {
        let u = Vector2::new(th.cos(), th.sin());
        let g = 9.81;
        let alpha = g + ba_up;
        // α(−bg_y, bg_x) = tilt·u
        let bg = Vector3::new(tilt * u.y / alpha, -tilt * u.x / alpha, bgz);
        ErrorInputs { dv0: Vector3::new(dv * u.x, dv * u.y, 0.0), ba: Vector3::new(ba * u.x, ba * u.y, ba_up), bg, g }
    })
}

fn random_walk(n: usize, seed_values: &[f64]) -> ImuSequence {
    let samples = (0..n)
        .map(|i| {
            let v = |k: usize| seed_values[(i * 6 + k) % seed_values.len()];
            ImuSample::new(i as f64 * 0.01, Vector3::new(v(0), v(1), v(2) - 9.81), Vector3::new(v(3), v(4), v(5)))
        })
        .collect();
    ImuSequence::with_rate(samples, 100.0).unwrap()
}

fn max_abs(m: &Matrix15) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slicing_keeps_time_order(values in prop::collection::vec(-1.0..1.0_f64, 6..60), a in 0usize..200, b in 0usize..200) {
        let seq = random_walk(200, &values);
        let (lo, hi) = (a.min(b), a.max(b));
        let part = seq.slice(lo..hi).unwrap();
        prop_assert_eq!(part.len(), hi - lo);
        prop_assert!(part.samples().windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn canonical_log_round_trips(values in prop::collection::vec(-50.0..50.0_f64, 6..60), n in 2usize..120) {
        let seq = random_walk(n, &values);
        let mut buf = Vec::new();
        write_imu_log(&seq, &mut buf).unwrap();
        let back = parse_imu_log(buf.as_slice(), &FormatConfig::default()).unwrap();
        prop_assert_eq!(back.samples(), seq.samples());
    }

    #[test]
    fn stationary_windows_are_disjoint_and_long_enough(bursts in prop::collection::vec((0usize..1500, 1usize..200), 0..6)) {
        let mut samples: Vec<ImuSample> = (0..1500)
            .map(|i| ImuSample::new(i as f64 * 0.01, Vector3::new(0.0, 0.0, -9.81), Vector3::zeros()))
            .collect();
        for (start, len) in bursts {
            for (j, s) in samples.iter_mut().enumerate().skip(start).take(len) {
                s.w.z = if j % 2 == 0 { 0.5 } else { -0.5 };
            }
        }
        let seq = ImuSequence::with_rate(samples, 100.0).unwrap();
        let cfg = StationaryConfig::default();
        let windows = detect_stationary(&seq, &cfg);
        for w in &windows {
            prop_assert!(w.duration >= cfg.min_duration_s - 1e-9);
        }
        for pair in windows.windows(2) {
            prop_assert!(pair[0].end_idx <= pair[1].start_idx);
        }
    }

    #[test]
    fn raw_calibration_is_identity(values in prop::collection::vec(-5.0..5.0_f64, 6..30)) {
        let seq = random_walk(150, &values);
        let (out, result) = auto_calibrate(&seq, CalibMode::Rd, &StationaryConfig::default(), &CalibConfig::default()).unwrap();
        prop_assert!(result.is_none());
        prop_assert_eq!(&out, &seq);
        let dummy = CalibResult {
            gyro_bias: Vector3::repeat(1.0),
            accel_bias: Some(Vector3::repeat(1.0)),
            source_window: detect_stationary(&seq, &StationaryConfig::default()).first().copied().unwrap_or(
                morpi::ingest::StationaryWindow { start_idx: 0, end_idx: 1, duration: 0.01 },
            ),
        };
        prop_assert_eq!(apply_calibration(&seq, &dummy, CalibMode::Rd), seq);
    }

    #[test]
    fn segment_norms_match_distances(segs in prop::collection::vec((0.0..3.0_f64, -PI..PI), 0..40), ox in -10.0..10.0_f64, oy in -10.0..10.0_f64) {
        let (d, h): (Vec<f64>, Vec<f64>) = segs.into_iter().unzip();
        let track = dead_reckon(&d, &h, Vector2::new(ox, oy)).unwrap();
        prop_assert_eq!(track.positions.len(), d.len() + 1);
        for (k, s) in d.iter().enumerate() {
            let step = (track.positions[k + 1] - track.positions[k]).norm();
            prop_assert!((step - s).abs() <= 1e-12 * (1.0 + ox.abs() + oy.abs() + track.total_distance()));
        }
        let chord = (track.endpoint() - track.positions[0]).norm();
        prop_assert!(track.total_distance() + 1e-9 >= chord);
    }

    #[test]
    fn weinberg_ignores_constant_offsets(m in mode(), offset in -20.0..20.0_f64, a in 400usize..900, len in 20usize..300) {
        let seq = sine_imu();
        let b = (a + len).min(seq.len() - 1);
        let shifted = seq.map_samples(|s| {
            let mut s = *s;
            match m {
                MorpiMode::A => s.f.y += offset,
                MorpiMode::G => s.w.z += offset,
            }
            s
        }).unwrap();
        let gain = WeinbergGain::new(0.7, m).unwrap();
        let d0 = weinberg_distance(seq, (a, b), m, &gain).unwrap();
        let d1 = weinberg_distance(&shifted, (a, b), m, &gain).unwrap();
        prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1e-3), "{} vs {}", d0, d1);
    }

    #[test]
    fn error_state_transition_identity_and_semigroup(inputs in aligned_inputs(), dt in 0.0..2.0_f64) {
        prop_assert_eq!(transition_matrix(0.0, &inputs), Matrix15::identity());
        let half = transition_matrix(dt, &inputs);
        let full = transition_matrix(2.0 * dt, &inputs);
        let diff = max_abs(&(full - half * half));
        prop_assert!(diff <= 1e-12 * max_abs(&full).max(1.0), "deviation {}", diff);
        for b in 0..5 {
            let block = full.fixed_view::<3, 3>(3 * b, 3 * b).into_owned();
            prop_assert_eq!(block, Matrix3::identity());
            for c in 0..b {
                prop_assert_eq!(full.fixed_view::<3, 3>(3 * b, 3 * c).into_owned(), Matrix3::zeros());
            }
        }
    }

    #[test]
    fn planar_error_never_exceeds_spatial(inputs in aligned_inputs(), t in 0.0..15.0_f64, dt in 0.0..5.0_f64) {
        let e2 = ins_error_2d(t, &inputs);
        let e3 = ins_error_3d(t, &inputs);
        prop_assert!(e2 <= e3 + 1e-12 * e3.max(1.0), "e2d {} > e3d {}", e2, e3);
        prop_assert!(ins_error_3d(t + dt, &inputs) + 1e-12 >= e3);
        prop_assert!(ins_error_2d(t + dt, &inputs) + 1e-12 >= e2);
    }

    #[test]
    fn morpi_error_is_linear(df in prop::collection::vec(0.0..3.0_f64, 1..30), dg in -0.5..0.5_f64, k in 0.1..10.0_f64, g in 0.1..5.0_f64) {
        let gain = WeinbergGain::new(g, MorpiMode::A).unwrap();
        let base = morpi_error(dg, &df, &gain);
        let by_dg = morpi_error(k * dg, &df, &gain);
        let by_gain = morpi_error(dg, &df, &gain.scaled(k));
        for ((b, x), y) in base.iter().zip(&by_dg).zip(&by_gain) {
            let tol = 1e-12 * (k * b).abs().max(1e-12);
            prop_assert!((x - k * b).abs() <= tol);
            prop_assert!((y - k * b).abs() <= tol);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn orthonormality_survives_many_small_steps(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut c = Matrix3::identity();
        for _ in 0..10_000 {
            let w = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            c = propagate_attitude(&c, &w, 0.01);
        }
        prop_assert!(orthonormality_error(&c) < 1e-9);
    }

    #[test]
    fn gain_scaling_scales_the_track(m in mode(), c in 0.05..20.0_f64) {
        let base = base_track(m);
        let gain = WeinbergGain::new(c, m).unwrap();
        let track = run_morpi(sine_imu(), m, CalibMode::Rd, &gain, &MorpiConfig::default()).unwrap();
        prop_assert_eq!(&track.headings, &base.headings);
        for (s, s0) in track.segment_distances.iter().zip(&base.segment_distances) {
            prop_assert!((s - c * s0).abs() <= 1e-12 * c * s0);
        }
        let scaled = base.endpoint() * c;
        prop_assert!((track.endpoint() - scaled).norm() <= 1e-12 * scaled.norm());
    }

    #[test]
    fn corruption_is_seed_deterministic(seed in any::<u64>()) {
        let seq = sine_imu().slice(0..500).unwrap();
        let spec = SensorSpec::mpu6500();
        let a = corrupt(&seq, &spec, seed).unwrap();
        let b = corrupt(&seq, &spec, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let c = corrupt(&seq, &spec, seed.wrapping_add(1)).unwrap();
        prop_assert_ne!(a, c);
    }

    #[test]
    fn bias_calibration_is_exact_and_idempotent(bg in vec3(0.1), ba in vec3(0.5)) {
        let truth = generate_truth(&TrajectorySpec::straight(3.0, 0.5)).unwrap();
        let ideal = imu_from_truth(&truth, 9.81).unwrap();
        let spec = SensorSpec { accel_bias: ba, gyro_bias: bg, ..SensorSpec::ideal() };
        let biased = corrupt(&ideal, &spec, 0).unwrap();
        let st = StationaryConfig::default();
        let cfg = CalibConfig::default();
        let (gc, _) = auto_calibrate(&biased, CalibMode::Gc, &st, &cfg).unwrap();
        let (gac, _) = auto_calibrate(&biased, CalibMode::Gac, &st, &cfg).unwrap();
        for ((x, y), z) in ideal.samples().iter().zip(gc.samples()).zip(gac.samples()) {
            prop_assert!((y.w - x.w).amax() < 1e-12);
            prop_assert!((z.w - x.w).amax() < 1e-12);
            prop_assert!((z.f - x.f).amax() < 1e-12);
        }
        let (_, second) = auto_calibrate(&gac, CalibMode::Gac, &st, &cfg).unwrap();
        let second = second.unwrap();
        prop_assert!(second.gyro_bias.amax() < 1e-12);
        prop_assert!(second.accel_bias.unwrap().amax() < 1e-12);
    }
}
