//! Closed-form position-error growth for straight-line inertial navigation,
//! and the linear error of the Weinberg segment estimator.
//!
//! The 15-state error vector is `[δp, δv, ε, b_a, b_g]`, all in the z-down
//! navigation/body frame. For a level straight run the specific force is
//! constant, the system matrix is nilpotent and the transition matrix is a
//! cubic polynomial in time.
//!
//! `ErrorInputs::ba.z` is measured along the sensed gravity reaction (up), so
//! the magnitude of the vertical specific force is `α = g + ba.z`. Use
//! [`ErrorInputs::from_body`] to convert a bias injected on the z-down axis.

use std::io::Write;

use log::debug;
use nalgebra::{Matrix3, SMatrix, SVector, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morpi::{signal_range, PeakSet, WeinbergGain};
use crate::simgen::{corrupt, generate_truth, imu_from_truth, TrajectorySpec};
use crate::strapdown::{mechanize_2d, mechanize_3d, PlanarState};
use crate::types::{skew, ImuSequence, NavState, SensorSpec};

pub type Matrix15 = SMatrix<f64, 15, 15>;
pub type Vector15 = SVector<f64, 15>;

pub const POS: usize = 0;
pub const VEL: usize = 3;
pub const ATT: usize = 6;
pub const BA: usize = 9;
pub const BG: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorInputs {
    /// Initial velocity error, m/s.
    pub dv0: Vector3<f64>,
    /// Accelerometer bias, m/s²; `z` positive along the gravity reaction.
    pub ba: Vector3<f64>,
    /// Gyro bias in the z-down body frame, rad/s.
    pub bg: Vector3<f64>,
    pub g: f64,
}

impl ErrorInputs {
    pub fn zero(g: f64) -> Self {
        Self { dv0: Vector3::zeros(), ba: Vector3::zeros(), bg: Vector3::zeros(), g }
    }

    /// From biases as they are added to z-down body-frame readings.
    pub fn from_body(dv0: Vector3<f64>, ba_body: Vector3<f64>, bg_body: Vector3<f64>, g: f64) -> Self {
        Self { dv0, ba: Vector3::new(ba_body.x, ba_body.y, -ba_body.z), bg: bg_body, g }
    }

    pub fn from_sensor(spec: &SensorSpec, dv0: Vector3<f64>) -> Self {
        Self::from_body(dv0, spec.accel_bias, spec.gyro_bias, spec.gravity)
    }

    pub fn alpha(&self) -> f64 {
        self.g + self.ba.z
    }

    /// Accelerometer bias on the z-down body axes.
    pub fn ba_body(&self) -> Vector3<f64> {
        Vector3::new(self.ba.x, self.ba.y, -self.ba.z)
    }

    /// Navigation-frame specific force of a level unit at rest.
    pub fn specific_force(&self) -> Vector3<f64> {
        Vector3::new(self.ba.x, self.ba.y, -self.alpha())
    }

    /// Initial error-state vector (zero position and misalignment).
    pub fn initial_state(&self) -> Vector15 {
        let mut x = Vector15::zeros();
        x.fixed_rows_mut::<3>(VEL).copy_from(&self.dv0);
        x.fixed_rows_mut::<3>(BA).copy_from(&self.ba_body());
        x.fixed_rows_mut::<3>(BG).copy_from(&self.bg);
        x
    }

    /// Horizontal velocity, accelerometer and gyro-tilt terms pull in
    /// non-opposing directions. Under this condition both closed-form curves
    /// are non-decreasing and the planar curve never exceeds the 3D one.
    pub fn is_aligned(&self) -> bool {
        let dv = self.dv0.xy();
        let ba = self.ba.xy();
        let tilt = Vector2::new(-self.bg.y, self.bg.x) * self.alpha();
        dv.dot(&ba) >= 0.0 && dv.dot(&tilt) >= 0.0 && ba.dot(&tilt) >= 0.0
    }
}

fn put(m: &mut Matrix15, row: usize, col: usize, block: &Matrix3<f64>) {
    m.fixed_view_mut::<3, 3>(row, col).copy_from(block);
}

/// Continuous-time error dynamics `δẋ = F δx`.
pub fn system_matrix(f_n: &Vector3<f64>, c: &Matrix3<f64>) -> Matrix15 {
    let mut f = Matrix15::zeros();
    put(&mut f, POS, VEL, &Matrix3::identity());
    put(&mut f, VEL, ATT, &(-skew(f_n)));
    put(&mut f, VEL, BA, c);
    put(&mut f, ATT, BG, c);
    f
}

/// Transition matrix over `t` seconds for constant `f_n` and attitude `c`.
pub fn transition_matrix_general(t: f64, f_n: &Vector3<f64>, c: &Matrix3<f64>) -> Matrix15 {
    let k = -skew(f_n);
    let i = Matrix3::identity();
    let (t2, t3) = (t * t / 2.0, t * t * t / 6.0);
    let mut phi = Matrix15::identity();
    put(&mut phi, POS, VEL, &(i * t));
    put(&mut phi, POS, ATT, &(k * t2));
    put(&mut phi, POS, BA, &(c * t2));
    put(&mut phi, POS, BG, &(k * c * t3));
    put(&mut phi, VEL, ATT, &(k * t));
    put(&mut phi, VEL, BA, &(c * t));
    put(&mut phi, VEL, BG, &(k * c * t2));
    put(&mut phi, ATT, BG, &(c * t));
    phi
}

/// Transition matrix for a level straight run (body and navigation frames
/// coincide).
pub fn transition_matrix(t: f64, inputs: &ErrorInputs) -> Matrix15 {
    transition_matrix_general(t, &inputs.specific_force(), &Matrix3::identity())
}

/// Horizontal position error polynomials with every yaw-rate-bias term
/// dropped.
pub fn position_error(t: f64, inputs: &ErrorInputs) -> Vector2<f64> {
    let a = inputs.alpha();
    let (dv, ba, bg) = (&inputs.dv0, &inputs.ba, &inputs.bg);
    let (t2, t3) = (t * t / 2.0, t * t * t / 6.0);
    Vector2::new(dv.x * t + ba.x * t2 - a * bg.y * t3, dv.y * t + ba.y * t2 + a * bg.x * t3)
}

/// 3D strapdown horizontal distance error at time `t`.
pub fn ins_error_3d(t: f64, inputs: &ErrorInputs) -> f64 {
    position_error(t, inputs).norm()
}

/// The square-root polynomial with the cross terms in the form
/// `δv_x b_gy + δv_y b_gx` and `b_ax b_gy + b_ay b_gx`. It coincides with
/// [`ins_error_3d`] when `b_gx (δv_y, b_ay) = 0` and otherwise disagrees with
/// the mechanized error; kept for comparison.
pub fn ins_error_3d_symmetric_cross(t: f64, inputs: &ErrorInputs) -> f64 {
    let a = inputs.alpha();
    let (dv, ba, bg) = (&inputs.dv0, &inputs.ba, &inputs.bg);
    let radicand = (dv.x * dv.x + dv.y * dv.y) * t.powi(2)
        + (dv.x * ba.x + dv.y * ba.y) * t.powi(3)
        + (0.25 * (ba.x * ba.x + ba.y * ba.y) - a / 3.0 * (dv.x * bg.y + dv.y * bg.x)) * t.powi(4)
        - a / 6.0 * (ba.x * bg.y + ba.y * bg.x) * t.powi(5)
        + a * a / 36.0 * (bg.y * bg.y + bg.x * bg.x) * t.powi(6);
    debug_assert!(radicand >= -1e-9 * (1.0 + radicand.abs()), "negative radicand {radicand}");
    radicand.max(0.0).sqrt()
}

/// Yaw-only planar strapdown distance error at time `t`.
pub fn ins_error_2d(t: f64, inputs: &ErrorInputs) -> f64 {
    (inputs.dv0.xy() * t + inputs.ba.xy() * (t * t / 2.0)).norm()
}

/// Cumulative segment-length error `δs_N = Σ_{k≤N} δG·G·Δf_k`, where
/// `Δf_k = range_k^¼`. Element `N−1` holds the error after `N` segments.
pub fn morpi_error(dg_fraction: f64, delta_f: &[f64], gain: &WeinbergGain) -> Vec<f64> {
    let scale = dg_fraction * gain.value;
    delta_f
        .iter()
        .scan(0.0, |acc, df| {
            *acc += scale * df;
            Some(*acc)
        })
        .collect()
}

/// Segment structure of a periodic run: completion time and `Δf` of each
/// segment, plus the gain in use.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSegments {
    pub end_times: Vec<f64>,
    pub delta_f: Vec<f64>,
    pub gain: WeinbergGain,
}

impl PeriodicSegments {
    /// `n` identical segments of `duration` seconds and length `length`.
    pub fn uniform(n: usize, duration: f64, length: f64, gain: WeinbergGain) -> Self {
        let df = length / gain.value;
        Self { end_times: (1..=n).map(|k| k as f64 * duration).collect(), delta_f: vec![df; n], gain }
    }

    /// Segments of a detected peak set, with end times measured from the
    /// start of motion.
    pub fn from_peaks(seq: &ImuSequence, peaks: &PeakSet, gain: WeinbergGain) -> Result<Self> {
        let t0 = seq.samples()[peaks.motion_bounds.0].t;
        let mut end_times = Vec::with_capacity(peaks.segment_count());
        let mut delta_f = Vec::with_capacity(peaks.segment_count());
        for k in 0..peaks.segment_count() {
            let seg = peaks.segment(k)?;
            end_times.push(seq.samples()[seg.1].t - t0);
            delta_f.push(signal_range(seq, peaks.kind, seg)?.powf(0.25));
        }
        Ok(Self { end_times, delta_f, gain })
    }

    pub fn end_time(&self) -> f64 {
        self.end_times.last().copied().unwrap_or(0.0)
    }

    /// Step function of the cumulative error over `grid`.
    pub fn error_curve(&self, dg_fraction: f64, grid: &[f64]) -> Vec<f64> {
        let cumulative = morpi_error(dg_fraction, &self.delta_f, &self.gain);
        grid.iter()
            .map(|&t| {
                let done = self.end_times.partition_point(|&e| e <= t + 1e-12);
                if done == 0 {
                    0.0
                } else {
                    cumulative[done - 1]
                }
            })
            .collect()
    }

    pub fn final_error(&self, dg_fraction: f64) -> f64 {
        morpi_error(dg_fraction, &self.delta_f, &self.gain).last().copied().unwrap_or(0.0)
    }
}

/// `0..=end` in steps of `step`.
pub fn time_grid(end: f64, step: f64) -> Vec<f64> {
    let n = (end / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

pub fn default_time_grid() -> Vec<f64> {
    time_grid(15.0, 0.01)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBudget {
    pub time_grid: Vec<f64>,
    pub e3d: Vec<f64>,
    pub e2d: Vec<f64>,
    /// One step curve per gain-error fraction.
    pub morpi_ds: Vec<(f64, Vec<f64>)>,
}

impl ErrorBudget {
    pub fn evaluate(grid: &[f64], inputs: &ErrorInputs, segments: Option<&PeriodicSegments>, dg_fractions: &[f64]) -> Self {
        let morpi_ds = match segments {
            Some(s) => dg_fractions.iter().map(|&dg| (dg, s.error_curve(dg, grid))).collect(),
            None => Vec::new(),
        };
        Self {
            time_grid: grid.to_vec(),
            e3d: grid.iter().map(|&t| ins_error_3d(t, inputs)).collect(),
            e2d: grid.iter().map(|&t| ins_error_2d(t, inputs)).collect(),
            morpi_ds,
        }
    }

    /// Writes `t,e3d,e2d` followed by `morpi_ds` (single curve) or
    /// `morpi_ds(5%)`-style columns.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t,e3d,e2d")?;
        match self.morpi_ds.as_slice() {
            [] => {}
            [_] => write!(out, ",morpi_ds")?,
            many => {
                for (dg, _) in many {
                    write!(out, ",morpi_ds({}%)", dg * 100.0)?;
                }
            }
        }
        writeln!(out)?;
        for (i, t) in self.time_grid.iter().enumerate() {
            write!(out, "{t},{},{}", self.e3d[i], self.e2d[i])?;
            for (_, c) in &self.morpi_ds {
                write!(out, ",{}", c[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Empirical versus closed-form error on a simulated straight run.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub times: Vec<f64>,
    pub closed_3d: Vec<f64>,
    pub closed_2d: Vec<f64>,
    /// Per trial, per time.
    pub empirical_3d: Vec<Vec<f64>>,
    pub empirical_2d: Vec<Vec<f64>>,
}

impl MonteCarloReport {
    pub fn mean(curves: &[Vec<f64>]) -> Vec<f64> {
        let n = curves.len() as f64;
        (0..curves[0].len()).map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / n).collect()
    }

    /// Per-time (min, max) across trials.
    pub fn envelope(curves: &[Vec<f64>]) -> Vec<(f64, f64)> {
        (0..curves[0].len())
            .map(|i| curves.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c[i]), hi.max(c[i]))))
            .collect()
    }

    /// Largest `|empirical − closed| / closed` over trial means, restricted to
    /// times up to `horizon` where the closed form exceeds `floor` metres.
    pub fn max_relative_deviation(&self, floor: f64, horizon: f64) -> (f64, f64) {
        let rel = |emp: &[f64], cf: &[f64]| {
            emp.iter()
                .zip(cf)
                .zip(&self.times)
                .filter(|((_, c), t)| **c > floor && **t <= horizon + 1e-9)
                .map(|((e, c), _)| (e - c).abs() / c)
                .fold(0.0, f64::max)
        };
        (rel(&Self::mean(&self.empirical_3d), &self.closed_3d), rel(&Self::mean(&self.empirical_2d), &self.closed_2d))
    }
}

/// Injects the biases of `inputs` (plus white noise at `noise` densities, if
/// given) into ideal IMU data of a straight run starting with speed zero at
/// `t = 0`, starts both mechanizations with velocity error `dv0`, and compares
/// horizontal position error against the closed forms at each sample.
pub fn monte_carlo_check(
    trajectory: &TrajectorySpec,
    inputs: &ErrorInputs,
    noise: Option<&SensorSpec>,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::Config("need at least one trial".into()));
    }
    let truth = generate_truth(trajectory)?;
    let ideal = imu_from_truth(&truth, inputs.g)?;
    let yaw0 = truth.initial_yaw();
    let mut sensor = SensorSpec { accel_bias: inputs.ba_body(), gyro_bias: inputs.bg, gravity: inputs.g, ..SensorSpec::ideal() };
    if let Some(n) = noise {
        sensor.accel_noise_density = n.accel_noise_density;
        sensor.gyro_noise_density = n.gyro_noise_density;
    }
    let times: Vec<f64> = ideal.times().collect();
    let truth_start: Vec<Vector2<f64>> = truth.samples.iter().map(|s| truth.to_start_frame(&s.p)).collect();

    let runs: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seq = corrupt(&ideal, &sensor, seed.wrapping_add(i as u64))?;
            let v0 = truth.samples[0].v;
            let v0_body = Vector3::new(v0.x * yaw0.cos() + v0.y * yaw0.sin(), -v0.x * yaw0.sin() + v0.y * yaw0.cos(), 0.0);
            let nav3 = mechanize_3d(&seq, &NavState { v: v0_body + inputs.dv0, ..NavState::default() }, inputs.g)?;
            let nav2 = mechanize_2d(&seq, &PlanarState { v: v0_body.xy() + inputs.dv0.xy(), ..PlanarState::default() })?;
            let e3 = (0..seq.len()).map(|k| (nav3.planar_position(k) - truth_start[k]).norm()).collect();
            let e2 = (0..seq.len()).map(|k| (nav2.planar_position(k) - truth_start[k]).norm()).collect();
            Ok((e3, e2))
        })
        .collect();
    let (mut empirical_3d, mut empirical_2d) = (Vec::with_capacity(trials), Vec::with_capacity(trials));
    for r in runs {
        let (a, b) = r?;
        empirical_3d.push(a);
        empirical_2d.push(b);
    }
    debug!("monte carlo: {trials} trials over {} samples", times.len());
    Ok(MonteCarloReport {
        closed_3d: times.iter().map(|&t| ins_error_3d(t, inputs)).collect(),
        closed_2d: times.iter().map(|&t| ins_error_2d(t, inputs)).collect(),
        times,
        empirical_3d,
        empirical_2d,
    })
}

/// A straight run that starts from rest at `t = 0` with a short ramp and
/// keeps cruising for at least `duration` seconds.
pub fn straight_oracle_spec(duration: f64, speed: f64, rate_hz: f64) -> TrajectorySpec {
    let ramp_s = 2.0;
    let mut spec = TrajectorySpec::straight(speed * (duration + ramp_s), speed);
    spec.head_stationary_s = 0.0;
    spec.tail_stationary_s = 0.0;
    spec.rate_hz = rate_hz;
    spec.speed.ramp_s = ramp_s;
    spec
}

/// Straight-line INS versus periodic-motion error comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCheck {
    pub straight_time: f64,
    pub periodic_time: f64,
    pub e3d: f64,
    pub e2d: f64,
    /// `(δG, δs at the periodic end time)`.
    pub morpi: Vec<(f64, f64)>,
}

impl OrderingCheck {
    pub fn evaluate(inputs: &ErrorInputs, straight_time: f64, segments: &PeriodicSegments, dg_fractions: &[f64]) -> Self {
        Self {
            straight_time,
            periodic_time: segments.end_time(),
            e3d: ins_error_3d(straight_time, inputs),
            e2d: ins_error_2d(straight_time, inputs),
            morpi: dg_fractions.iter().map(|&dg| (dg, segments.final_error(dg))).collect(),
        }
    }

    pub fn morpi_below_both(&self) -> bool {
        self.morpi.iter().all(|&(_, ds)| ds < self.e3d && ds < self.e2d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morpi::MorpiMode;
    use crate::strapdown::rotation_from_vector;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn random_inputs(rng: &mut impl Rng) -> ErrorInputs {
        let mut v = || Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        ErrorInputs { dv0: v() * 0.1, ba: v() * 0.3, bg: v() * 0.02, g: 9.81 }
    }

    #[test]
    fn alpha_definition() {
        let i = ErrorInputs { ba: Vector3::new(0.0, 0.0, 0.25), ..ErrorInputs::zero(9.81) };
        assert_eq!(i.alpha(), 9.81 + 0.25);
        let b = ErrorInputs::from_body(Vector3::zeros(), Vector3::new(0.1, 0.2, 0.3), Vector3::zeros(), 9.81);
        assert_eq!(b.alpha(), 9.81 - 0.3);
        assert_eq!(b.ba_body(), Vector3::new(0.1, 0.2, 0.3));
    }

    #[test]
    fn system_matrix_blocks() {
        let f0 = system_matrix(&Vector3::zeros(), &Matrix3::identity());
        let mut expected = Matrix15::zeros();
        put(&mut expected, POS, VEL, &Matrix3::identity());
        put(&mut expected, VEL, BA, &Matrix3::identity());
        put(&mut expected, ATT, BG, &Matrix3::identity());
        assert_eq!(f0, expected);
        let f = system_matrix(&Vector3::new(0.3, -0.2, -9.8), &Matrix3::identity());
        let k = f.fixed_view::<3, 3>(VEL, ATT);
        assert_eq!(k + k.transpose(), Matrix3::zeros());
    }

    #[test]
    fn system_matrix_matches_finite_difference_jacobian() {
        let c = rotation_from_vector(&Vector3::new(0.1, -0.2, 0.7));
        let f_b = Vector3::new(0.4, -0.3, -9.81);
        let f_n = c * f_b;
        // δv̇ of the computed solution with attitude error ε and accel bias b_a
        let dv_dot = |eps: &Vector3<f64>, ba: &Vector3<f64>| rotation_from_vector(eps) * c * (f_b + ba) - c * f_b;
        let h = 1e-6;
        let mut jac_eps = Matrix3::zeros();
        let mut jac_ba = Matrix3::zeros();
        for j in 0..3 {
            let mut d = Vector3::zeros();
            d[j] = h;
            jac_eps.set_column(j, &((dv_dot(&d, &Vector3::zeros()) - dv_dot(&-d, &Vector3::zeros())) / (2.0 * h)));
            jac_ba.set_column(j, &((dv_dot(&Vector3::zeros(), &d) - dv_dot(&Vector3::zeros(), &-d)) / (2.0 * h)));
        }
        let f = system_matrix(&f_n, &c);
        assert_relative_eq!(f.fixed_view::<3, 3>(VEL, ATT).into_owned(), jac_eps, epsilon = 1e-6);
        assert_relative_eq!(f.fixed_view::<3, 3>(VEL, BA).into_owned(), jac_ba, epsilon = 1e-6);
    }

    #[test]
    fn transition_matches_matrix_exponential() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let inputs = random_inputs(&mut rng);
            let t = rng.random_range(0.0..15.0);
            let f = system_matrix(&inputs.specific_force(), &Matrix3::identity());
            let oracle = (f * t).exp();
            let phi = transition_matrix(t, &inputs);
            assert!((phi - oracle).amax() < 1e-9 * (1.0 + oracle.amax()), "t={t}");
        }
        let c = rotation_from_vector(&Vector3::new(0.0, 0.0, 1.2));
        let fn_ = Vector3::new(0.2, 0.1, -9.7);
        let phi = transition_matrix_general(3.0, &fn_, &c);
        assert!((phi - (system_matrix(&fn_, &c) * 3.0).exp()).amax() < 1e-9);
    }

    #[test]
    fn transition_identity_and_semigroup() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let inputs = random_inputs(&mut rng);
        assert_eq!(transition_matrix(0.0, &inputs), Matrix15::identity());
        for d in [0.01, 0.5, 2.5] {
            let lhs = transition_matrix(2.0 * d, &inputs);
            let rhs = transition_matrix(d, &inputs) * transition_matrix(d, &inputs);
            assert!((lhs - rhs).amax() < 1e-12, "Δ={d}");
        }
    }

    #[test]
    fn transition_position_rows_reproduce_polynomials() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let mut inputs = random_inputs(&mut rng);
            inputs.bg.z = 0.0;
            let t = rng.random_range(0.0..10.0);
            let x = transition_matrix(t, &inputs) * inputs.initial_state();
            assert_relative_eq!(x.fixed_rows::<2>(POS).into_owned(), position_error(t, &inputs), epsilon = 1e-10);
        }
    }

    #[test]
    fn closed_form_examples() {
        let zero = ErrorInputs::zero(9.81);
        for t in [0.0, 1.0, 7.5] {
            assert_eq!(ins_error_3d(t, &zero), 0.0);
            assert_eq!(ins_error_2d(t, &zero), 0.0);
        }
        let dv = ErrorInputs { dv0: Vector3::new(0.1, 0.0, 0.0), ..zero };
        assert_relative_eq!(ins_error_3d(5.0, &dv), 0.5, epsilon = 1e-15);
        let ba = ErrorInputs { ba: Vector3::new(0.588, 0.0, 0.0), ..zero };
        assert_relative_eq!(ins_error_2d(5.0, &ba), 7.35, epsilon = 1e-12);
        // numeric double integration of the constant bias as an oracle
        let (mut v, mut p, dt) = (0.0, 0.0, 1e-4);
        for _ in 0..50_000 {
            let v_next = v + 0.588 * dt;
            p += 0.5 * (v + v_next) * dt;
            v = v_next;
        }
        assert_relative_eq!(p, 7.35, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_cross_variant_agrees_only_without_x_gyro_coupling() {
        let inputs = ErrorInputs {
            dv0: Vector3::new(0.05, 0.0, 0.0),
            ba: Vector3::new(0.02, 0.0, 0.01),
            bg: Vector3::new(0.0, 4e-4, 0.0),
            g: 9.81,
        };
        for t in [1.0, 5.0, 10.0] {
            assert_relative_eq!(ins_error_3d(t, &inputs), ins_error_3d_symmetric_cross(t, &inputs), max_relative = 1e-12);
        }
        let coupled = ErrorInputs { dv0: Vector3::new(0.0, 0.05, 0.0), bg: Vector3::new(4e-4, 0.0, 0.0), ..inputs };
        assert!((ins_error_3d(10.0, &coupled) - ins_error_3d_symmetric_cross(10.0, &coupled)).abs() > 0.1);
    }

    #[test]
    fn morpi_error_is_linear() {
        let g = WeinbergGain::new(0.8, MorpiMode::A).unwrap();
        assert!(morpi_error(0.0, &[1.0, 2.0], &g).iter().all(|&x| x == 0.0));
        let ds = morpi_error(0.1, &[1.25; 8], &g);
        for (n, d) in ds.iter().enumerate() {
            assert_relative_eq!(*d, 0.1 * 0.8 * 1.25 * (n + 1) as f64, epsilon = 1e-14);
        }
        let segs = PeriodicSegments::uniform(4, 2.0, 1.0, g);
        let curve = segs.error_curve(0.1, &[0.0, 1.9, 2.0, 5.0, 8.0, 20.0]);
        assert_eq!(curve.len(), 6);
        assert_relative_eq!(curve[2], 0.1, epsilon = 1e-12);
        assert_relative_eq!(curve[3], 0.2, epsilon = 1e-12);
        assert_relative_eq!(curve[5], 0.4, epsilon = 1e-12);
        assert_eq!(curve[1], 0.0);
    }

    #[test]
    fn budget_csv_columns() {
        let g = WeinbergGain::new(1.0, MorpiMode::A).unwrap();
        let segs = PeriodicSegments::uniform(3, 1.0, 1.0, g);
        let b = ErrorBudget::evaluate(&time_grid(2.0, 0.5), &ErrorInputs::zero(9.81), Some(&segs), &[0.05, 0.1]);
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,e3d,e2d,morpi_ds(5%),morpi_ds(10%)\n0,0,0,0,0\n"));
        assert_eq!(text.lines().count(), 6);
        assert_eq!(default_time_grid().len(), 1501);
    }
}
