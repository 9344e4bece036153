//! Synthetic ground truth and IMU generation.
//!
//! A planar path is traversed at a smooth arc-length speed profile between
//! stationary head and tail intervals. Positions, velocities, accelerations,
//! heading and heading rate are evaluated analytically (arc-length inversion
//! and turn geometry use Gauss–Legendre quadrature), so the ideal IMU carries
//! no finite-difference error. Heading follows the path tangent.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use nalgebra::{Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{wrap_angle, ImuSample, ImuSequence, SensorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Shape {
    Straight,
    /// Lateral offset `A·sin(2πx/λ + φ) − A·sin φ` along the base course.
    Sine {
        amplitude: f64,
        period: f64,
        #[serde(default = "default_sine_phase")]
        phase: f64,
    },
    /// Straight leg of `length`, a smooth turn, then `second_leg`. Leg lengths
    /// are measured to the corner where the two straight lines meet.
    LShape {
        second_leg: f64,
        #[serde(default = "default_turn_deg")]
        turn_deg: f64,
        #[serde(default = "default_turn_length")]
        turn_length: f64,
    },
}

/// Starts on the base-course heading with curvature maxima mid-cycle, so
/// every yaw-rate peak lies inside the motion.
fn default_sine_phase() -> f64 {
    FRAC_PI_2
}

fn default_turn_deg() -> f64 {
    90.0
}

fn default_turn_length() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedLevel {
    /// Arc-length speed, m/s.
    pub speed: f64,
    /// Cruise time at this speed; ignored for the last level, which cruises
    /// until only the final deceleration distance remains.
    #[serde(default)]
    pub hold_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    /// Duration of every raised-cosine speed transition, s.
    pub ramp_s: f64,
    pub levels: Vec<SpeedLevel>,
}

impl SpeedProfile {
    pub fn constant(speed: f64, ramp_s: f64) -> Self {
        Self { ramp_s, levels: vec![SpeedLevel { speed, hold_s: 0.0 }] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub shape: Shape,
    /// Base-course length (first leg for an L-shape), m.
    pub length: f64,
    pub speed: SpeedProfile,
    #[serde(default = "default_stationary")]
    pub head_stationary_s: f64,
    #[serde(default = "default_stationary")]
    pub tail_stationary_s: f64,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
}

fn default_stationary() -> f64 {
    3.0
}

fn default_rate() -> f64 {
    100.0
}

impl TrajectorySpec {
    pub fn straight(length: f64, speed: f64) -> Self {
        Self {
            shape: Shape::Straight,
            length,
            speed: SpeedProfile::constant(speed, 1.0),
            head_stationary_s: default_stationary(),
            tail_stationary_s: default_stationary(),
            rate_hz: default_rate(),
        }
    }

    pub fn sine(length: f64, amplitude: f64, period: f64, speed: f64) -> Self {
        Self { shape: Shape::Sine { amplitude, period, phase: default_sine_phase() }, ..Self::straight(length, speed) }
    }

    pub fn l_shape(first_leg: f64, second_leg: f64, speed: f64) -> Self {
        Self {
            shape: Shape::LShape { second_leg, turn_deg: default_turn_deg(), turn_length: default_turn_length() },
            ..Self::straight(first_leg, speed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.length.is_finite() && self.length > 0.0) {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return bad(format!("rate must be positive, got {}", self.rate_hz));
        }
        if !(self.head_stationary_s >= 0.0 && self.tail_stationary_s >= 0.0) {
            return bad("stationary durations must be non-negative".into());
        }
        if !(self.speed.ramp_s.is_finite() && self.speed.ramp_s > 0.0) {
            return bad("speed ramp must be positive".into());
        }
        if self.speed.levels.is_empty() {
            return bad("speed profile needs at least one level".into());
        }
        if self.speed.levels.iter().any(|l| !(l.speed > 0.0 && l.speed.is_finite() && l.hold_s >= 0.0)) {
            return bad("speed levels must be positive with non-negative holds".into());
        }
        match &self.shape {
            Shape::Straight => {}
            Shape::Sine { amplitude, period, phase } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return bad(format!("amplitude must be non-negative, got {amplitude}"));
                }
                if !(*period > 0.0 && period.is_finite()) {
                    return bad(format!("period must be positive, got {period}"));
                }
                if !phase.is_finite() {
                    return bad("phase must be finite".into());
                }
            }
            Shape::LShape { second_leg, turn_deg, turn_length } => {
                if !(second_leg.is_finite() && *second_leg > 0.0) {
                    return bad(format!("second leg must be positive, got {second_leg}"));
                }
                if !(turn_deg.abs() > 0.0 && turn_deg.abs() < 170.0) {
                    return bad(format!("turn angle must be within (0, 170) degrees in magnitude, got {turn_deg}"));
                }
                if !(turn_length.is_finite() && *turn_length > 0.0) {
                    return bad("turn length must be positive".into());
                }
            }
        }
        Ok(())
    }
}

/// One ground-truth epoch in the path's own frame (x along the base course).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    pub p: Vector2<f64>,
    pub v: Vector2<f64>,
    pub a: Vector2<f64>,
    pub yaw: f64,
    pub yaw_rate: f64,
    /// Arc length travelled so far, m.
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub samples: Vec<TruthSample>,
    pub path_length: f64,
    pub rate_hz: f64,
    /// Sample range during which the vehicle moves.
    pub motion: (usize, usize),
}

impl Truth {
    pub fn initial_yaw(&self) -> f64 {
        self.samples[0].yaw
    }

    pub fn endpoint(&self) -> Vector2<f64> {
        self.samples.last().map(|s| s.p).unwrap_or_else(Vector2::zeros)
    }

    /// Converts a path-frame point into the frame of the vehicle at the start
    /// (the frame in which mechanization with identity initial attitude works).
    pub fn to_start_frame(&self, p: &Vector2<f64>) -> Vector2<f64> {
        let (s, c) = self.initial_yaw().sin_cos();
        let d = p - self.samples[0].p;
        Vector2::new(c * d.x + s * d.y, -s * d.x + c * d.y)
    }

    pub fn endpoint_in_start_frame(&self) -> Vector2<f64> {
        self.to_start_frame(&self.endpoint())
    }

    /// Straight-line start-to-end distance.
    pub fn displacement(&self) -> f64 {
        (self.endpoint() - self.samples[0].p).norm()
    }

    /// Writes `t,x,y,psi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,y,psi")?;
        for s in &self.samples {
            writeln!(out, "{},{},{},{}", s.t, s.p.x, s.p.y, s.yaw)?;
        }
        Ok(())
    }
}

// --- quadrature -----------------------------------------------------------

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

fn gauss_legendre<T>(a: f64, b: f64, f: impl Fn(f64) -> T) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = f(mid + half * GL_NODES[0]) * GL_WEIGHTS[0];
    for i in 1..8 {
        acc = acc + f(mid + half * GL_NODES[i]) * GL_WEIGHTS[i];
    }
    acc * half
}

/// Cumulative integral of `f` on a uniform grid, refined on demand.
struct CumulativeTable<T> {
    step: f64,
    knots: Vec<T>,
}

impl<T> CumulativeTable<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    fn build(end: f64, step: f64, zero: T, f: &impl Fn(f64) -> T) -> Self {
        let n = (end / step).ceil().max(1.0) as usize;
        let mut knots = Vec::with_capacity(n + 1);
        knots.push(zero);
        let mut acc = zero;
        for j in 0..n {
            acc = acc + gauss_legendre(j as f64 * step, (j + 1) as f64 * step, f);
            knots.push(acc);
        }
        Self { step, knots }
    }

    fn eval(&self, x: f64, f: &impl Fn(f64) -> T) -> T {
        let j = ((x / self.step).floor().max(0.0) as usize).min(self.knots.len() - 1);
        let x0 = j as f64 * self.step;
        self.knots[j] + gauss_legendre(x0, x, f)
    }
}

// --- path geometry --------------------------------------------------------

/// Position and first two derivatives with respect to the curve parameter.
#[derive(Debug, Clone, Copy)]
struct CurvePoint {
    r: Vector2<f64>,
    d1: Vector2<f64>,
    d2: Vector2<f64>,
}

enum Curve {
    Straight {
        length: f64,
    },
    /// Parameterized by the base-course coordinate.
    Sine {
        length: f64,
        amplitude: f64,
        wavenumber: f64,
        phase: f64,
        arc: CumulativeTable<f64>,
    },
    /// Parameterized by arc length.
    Turn(TurnCurve),
}

struct TurnCurve {
    turn_start: f64,
    turn_length: f64,
    angle: f64,
    exit_dir: Vector2<f64>,
    turn_end_pos: Vector2<f64>,
    second_leg_remaining: f64,
    table: CumulativeTable<Vector2<f64>>,
}

impl TurnCurve {
    fn heading(&self, u: f64) -> f64 {
        // u ∈ [0, 1] across the turn; integral of a raised-cosine curvature
        self.angle * (u - (2.0 * PI * u).sin() / (2.0 * PI))
    }

    fn curvature(&self, u: f64) -> f64 {
        self.angle / self.turn_length * (1.0 - (2.0 * PI * u).cos())
    }

    fn tangent_at(&self, local_s: f64) -> Vector2<f64> {
        let (s, c) = self.heading(local_s / self.turn_length).sin_cos();
        Vector2::new(c, s)
    }

    fn total(&self) -> f64 {
        self.turn_start + self.turn_length + self.second_leg_remaining
    }

    fn point(&self, s: f64) -> CurvePoint {
        if s <= self.turn_start {
            return CurvePoint { r: Vector2::new(s, 0.0), d1: Vector2::x(), d2: Vector2::zeros() };
        }
        let local = s - self.turn_start;
        if local >= self.turn_length {
            return CurvePoint {
                r: self.turn_end_pos + self.exit_dir * (local - self.turn_length),
                d1: self.exit_dir,
                d2: Vector2::zeros(),
            };
        }
        let u = local / self.turn_length;
        let t = self.tangent_at(local);
        let k = self.curvature(u);
        let offset = self.table.eval(local, &|q| self.tangent_at(q));
        CurvePoint { r: Vector2::new(self.turn_start, 0.0) + offset, d1: t, d2: Vector2::new(-t.y, t.x) * k }
    }
}

impl Curve {
    fn from_spec(spec: &TrajectorySpec) -> Self {
        match &spec.shape {
            Shape::Straight => Curve::Straight { length: spec.length },
            Shape::Sine { amplitude, period, phase } => {
                let wavenumber = 2.0 * PI / period;
                let (a, k, ph) = (*amplitude, wavenumber, *phase);
                let speed = move |x: f64| (1.0 + (a * k * (k * x + ph).cos()).powi(2)).sqrt();
                let step = (period / 64.0).min(spec.length);
                let arc = CumulativeTable::build(spec.length, step, 0.0, &speed);
                Curve::Sine { length: spec.length, amplitude: a, wavenumber: k, phase: ph, arc }
            }
            Shape::LShape { second_leg, turn_deg, turn_length } => {
                let angle = turn_deg.to_radians();
                let mut turn = TurnCurve {
                    turn_start: 0.0,
                    turn_length: *turn_length,
                    angle,
                    exit_dir: Vector2::new(angle.cos(), angle.sin()),
                    turn_end_pos: Vector2::zeros(),
                    second_leg_remaining: 0.0,
                    table: CumulativeTable { step: 1.0, knots: vec![Vector2::zeros()] },
                };
                let step = turn_length / 64.0;
                turn.table = CumulativeTable::build(*turn_length, step, Vector2::zeros(), &|q| turn.tangent_at(q));
                // symmetric turn: chord = d·(u_in + u_out) for the tangent-to-corner distance d
                let chord = turn.table.eval(*turn_length, &|q| turn.tangent_at(q));
                let bisector = Vector2::x() + turn.exit_dir;
                let d = chord.dot(&bisector) / bisector.norm_squared();
                turn.turn_start = spec.length - d;
                turn.turn_end_pos = Vector2::new(turn.turn_start, 0.0) + chord;
                turn.second_leg_remaining = second_leg - d;
                Curve::Turn(turn)
            }
        }
    }

    /// Parameter range end.
    fn param_end(&self) -> f64 {
        match self {
            Curve::Straight { length } | Curve::Sine { length, .. } => *length,
            Curve::Turn(t) => t.total(),
        }
    }

    fn arc_length(&self) -> f64 {
        match self {
            Curve::Sine { length, arc, amplitude, wavenumber, phase } => {
                arc.eval(*length, &|x| sine_speed(*amplitude, *wavenumber, *phase, x))
            }
            _ => self.param_end(),
        }
    }

    fn point(&self, u: f64) -> CurvePoint {
        match self {
            Curve::Straight { .. } => CurvePoint { r: Vector2::new(u, 0.0), d1: Vector2::x(), d2: Vector2::zeros() },
            Curve::Sine { amplitude: a, wavenumber: k, phase, .. } => {
                let arg = k * u + phase;
                CurvePoint {
                    r: Vector2::new(u, a * arg.sin() - a * phase.sin()),
                    d1: Vector2::new(1.0, a * k * arg.cos()),
                    d2: Vector2::new(0.0, -a * k * k * arg.sin()),
                }
            }
            Curve::Turn(t) => t.point(u),
        }
    }

    /// Curve parameter at arc length `s`.
    fn param_at(&self, s: f64) -> f64 {
        match self {
            Curve::Sine { length, amplitude, wavenumber, phase, arc } => {
                let f = |x: f64| sine_speed(*amplitude, *wavenumber, *phase, x);
                let total = self.arc_length();
                let mut x = (s / total * length).clamp(0.0, *length);
                for _ in 0..50 {
                    let dx = (arc.eval(x, &f) - s) / f(x);
                    x -= dx;
                    if dx.abs() < 1e-14 {
                        break;
                    }
                }
                x
            }
            _ => s,
        }
    }
}

fn sine_speed(a: f64, k: f64, phase: f64, x: f64) -> f64 {
    (1.0 + (a * k * (k * x + phase).cos()).powi(2)).sqrt()
}

// --- speed profile --------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct Phase {
    from: f64,
    to: f64,
    duration: f64,
}

impl Phase {
    fn distance(&self) -> f64 {
        0.5 * (self.from + self.to) * self.duration
    }

    /// (arc length, speed, acceleration) at local time τ.
    fn eval(&self, tau: f64) -> (f64, f64, f64) {
        let d = self.duration;
        let dv = self.to - self.from;
        let x = PI * tau / d;
        let s = self.from * tau + 0.5 * dv * (tau - d / PI * x.sin());
        let v = self.from + 0.5 * dv * (1.0 - x.cos());
        let a = 0.5 * dv * PI / d * x.sin();
        (s, v, a)
    }
}

fn speed_phases(profile: &SpeedProfile, path_length: f64) -> Result<Vec<Phase>> {
    let r = profile.ramp_s;
    let mut phases = Vec::new();
    let mut prev = 0.0;
    for (i, level) in profile.levels.iter().enumerate() {
        phases.push(Phase { from: prev, to: level.speed, duration: r });
        if i + 1 < profile.levels.len() && level.hold_s > 0.0 {
            phases.push(Phase { from: level.speed, to: level.speed, duration: level.hold_s });
        }
        prev = level.speed;
    }
    let stop = Phase { from: prev, to: 0.0, duration: r };
    let used: f64 = phases.iter().map(Phase::distance).sum::<f64>() + stop.distance();
    let remaining = path_length - used;
    if remaining < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "speed profile covers {used:.3} m before the final cruise, path is only {path_length:.3} m"
        )));
    }
    phases.push(Phase { from: prev, to: prev, duration: remaining / prev });
    phases.push(stop);
    Ok(phases)
}

// --- generation -----------------------------------------------------------

/// Samples the ground-truth trajectory described by `spec`.
pub fn generate_truth(spec: &TrajectorySpec) -> Result<Truth> {
    spec.validate()?;
    let curve = Curve::from_spec(spec);
    let path_length = curve.arc_length();
    let phases = speed_phases(&spec.speed, path_length)?;
    let motion_time: f64 = phases.iter().map(|p| p.duration).sum();
    let total = spec.head_stationary_s + motion_time + spec.tail_stationary_s;
    let n = (total * spec.rate_hz).ceil() as usize + 1;

    let kinematics = |t: f64| -> (f64, f64, f64) {
        let mut tau = t - spec.head_stationary_s;
        if tau <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let mut s0 = 0.0;
        for p in &phases {
            if tau < p.duration {
                let (s, v, a) = p.eval(tau);
                return (s0 + s, v, a);
            }
            tau -= p.duration;
            s0 += p.distance();
        }
        (path_length, 0.0, 0.0)
    };

    let mut samples = Vec::with_capacity(n);
    let mut motion = (n, n);
    for i in 0..n {
        let t = i as f64 / spec.rate_hz;
        let (s, v, sdot2) = kinematics(t);
        let s = s.clamp(0.0, path_length);
        let u = curve.param_at(s);
        let cp = curve.point(u);
        let m = cp.d1.norm();
        let udot = v / m;
        // d/dt of v/m(u), with m' = (d1·d2)/m
        let udot2 = sdot2 / m - v * cp.d1.dot(&cp.d2) / (m * m * m) * udot;
        let vel = cp.d1 * udot;
        let acc = cp.d2 * udot * udot + cp.d1 * udot2;
        let yaw = cp.d1.y.atan2(cp.d1.x);
        let yaw_rate = (cp.d1.x * cp.d2.y - cp.d1.y * cp.d2.x) / (m * m) * udot;
        if v > 0.0 {
            motion.0 = motion.0.min(i);
            motion.1 = i + 1;
        }
        samples.push(TruthSample { t, p: cp.r, v: vel, a: acc, yaw: wrap_angle(yaw), yaw_rate, s });
    }
    if motion.0 >= motion.1 {
        motion = (0, 0);
    }
    Ok(Truth { samples, path_length, rate_hz: spec.rate_hz, motion })
}

/// Ideal body-frame IMU readings for a planar truth trajectory.
pub fn imu_from_truth(truth: &Truth, gravity: f64) -> Result<ImuSequence> {
    let samples = truth
        .samples
        .iter()
        .map(|s| {
            let (sn, cs) = s.yaw.sin_cos();
            // f = Cᵀ(a − g) with a horizontal and g = (0, 0, g)
            let f = Vector3::new(cs * s.a.x + sn * s.a.y, -sn * s.a.x + cs * s.a.y, -gravity);
            ImuSample::new(s.t, f, Vector3::new(0.0, 0.0, s.yaw_rate))
        })
        .collect();
    Ok(ImuSequence::with_rate(samples, truth.rate_hz)?.with_meta("source", "simgen"))
}

/// Adds constant bias and white noise (σ = density·√rate) per axis.
/// Identical seeds give bit-identical output.
pub fn corrupt(seq: &ImuSequence, spec: &SensorSpec, seed: u64) -> Result<ImuSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root_rate = seq.rate_hz().sqrt();
    let accel = Normal::new(0.0, spec.accel_noise_density * root_rate).map_err(|e| Error::Config(e.to_string()))?;
    let gyro = Normal::new(0.0, spec.gyro_noise_density * root_rate).map_err(|e| Error::Config(e.to_string()))?;
    let mut draw = |d: &Normal<f64>| Vector3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng));
    seq.map_samples(|s| {
        let f = s.f + spec.accel_bias + draw(&accel);
        let w = s.w + spec.gyro_bias + draw(&gyro);
        ImuSample::new(s.t, f, w)
    })
}
