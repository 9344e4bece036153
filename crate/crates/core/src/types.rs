//! Shared domain types and frame conventions.
//!
//! Body frame: x forward (direction of travel), y right, z down. The
//! navigation frame is fixed at the start point and coincides with the body
//! frame at the first sample, so at rest a level accelerometer reads
//! `(0, 0, -g)` and the navigation gravity vector is `(0, 0, +g)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravity magnitude used by mechanization and calibration unless overridden.
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Standard gravity, used only to convert datasheet `g` units to m/s².
pub const STANDARD_GRAVITY: f64 = 9.806_65;

/// Tolerance on the nominal/median sample-rate agreement.
const RATE_SANITY_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Seconds.
    pub t: f64,
    /// Specific force, m/s², body frame.
    pub f: Vector3<f64>,
    /// Angular rate, rad/s, body frame.
    pub w: Vector3<f64>,
}

impl ImuSample {
    pub fn new(t: f64, f: Vector3<f64>, w: Vector3<f64>) -> Self {
        Self { t, f, w }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.f.iter().all(|x| x.is_finite()) && self.w.iter().all(|x| x.is_finite())
    }
}

/// A validated, time-ordered run of IMU samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuSequence {
    samples: Vec<ImuSample>,
    rate_hz: f64,
    pub meta: BTreeMap<String, String>,
}

impl ImuSequence {
    /// Builds a sequence, deriving the nominal rate from the median sample spacing.
    pub fn new(samples: Vec<ImuSample>) -> Result<Self> {
        validate_samples(&samples)?;
        let rate_hz = median_rate(&samples).unwrap_or(1.0);
        Ok(Self { samples, rate_hz, meta: BTreeMap::new() })
    }

    /// Builds a sequence with an explicit nominal rate, which must agree with
    /// the median spacing to within 20%.
    pub fn with_rate(samples: Vec<ImuSample>, rate_hz: f64) -> Result<Self> {
        validate_samples(&samples)?;
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::Structure(format!("nominal rate must be positive, got {rate_hz}")));
        }
        if let Some(median) = median_rate(&samples) {
            if (rate_hz - median).abs() > RATE_SANITY_FRACTION * median {
                return Err(Error::Structure(format!(
                    "nominal rate {rate_hz} Hz disagrees with median sample rate {median:.3} Hz"
                )));
            }
        }
        Ok(Self { samples, rate_hz, meta: BTreeMap::new() })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Sub-sequence over `range`; keeps the nominal rate and metadata.
    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.samples.len() {
            return Err(Error::IndexOutOfRange { index: range.end, len: self.samples.len() });
        }
        Ok(Self { samples: self.samples[range].to_vec(), rate_hz: self.rate_hz, meta: self.meta.clone() })
    }

    /// Applies `op` to every sample, keeping timestamps.
    pub fn map_samples(&self, mut op: impl FnMut(&ImuSample) -> ImuSample) -> Result<Self> {
        let samples: Vec<ImuSample> = self.samples.iter().map(&mut op).collect();
        validate_samples(&samples)?;
        Ok(Self { samples, rate_hz: self.rate_hz, meta: self.meta.clone() })
    }

    pub fn into_samples(self) -> Vec<ImuSample> {
        self.samples
    }

    pub(crate) fn require_len(&self, min: usize) -> Result<()> {
        if self.samples.len() < min {
            return Err(Error::Structure(format!("need at least {min} samples, got {}", self.samples.len())));
        }
        Ok(())
    }
}

fn validate_samples(samples: &[ImuSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Structure("empty IMU sequence".into()));
    }
    for (i, s) in samples.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::Structure(format!("non-finite value in sample {i}")));
        }
    }
    for (i, pair) in samples.windows(2).enumerate() {
        if pair[1].t <= pair[0].t {
            return Err(Error::NonMonotoneTime { index: i + 1, prev: pair[0].t, next: pair[1].t });
        }
    }
    Ok(())
}

fn median_rate(samples: &[ImuSample]) -> Option<f64> {
    if samples.len() < 2 {
        return None;
    }
    let mut dts: Vec<f64> = samples.windows(2).map(|p| p[1].t - p[0].t).collect();
    dts.sort_by(f64::total_cmp);
    let n = dts.len();
    let median = if n % 2 == 1 { dts[n / 2] } else { 0.5 * (dts[n / 2 - 1] + dts[n / 2]) };
    Some(1.0 / median)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    /// Position, m, navigation frame.
    pub p: Vector3<f64>,
    /// Velocity, m/s, navigation frame.
    pub v: Vector3<f64>,
    /// Body-to-navigation rotation.
    pub c: Matrix3<f64>,
}

impl Default for NavState {
    /// At the origin, at rest, body aligned with the navigation frame.
    fn default() -> Self {
        Self { p: Vector3::zeros(), v: Vector3::zeros(), c: Matrix3::identity() }
    }
}

impl NavState {
    /// Largest absolute entry of `CᵀC − I`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.c)
    }

    pub fn is_valid(&self) -> bool {
        self.orthonormality_error() < 1e-9 && (self.c.determinant() - 1.0).abs() < 1e-9
    }
}

pub fn orthonormality_error(c: &Matrix3<f64>) -> f64 {
    (c.transpose() * c - Matrix3::identity()).amax()
}

/// Constant-bias plus white-noise sensor description, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub accel_bias: Vector3<f64>,
    pub gyro_bias: Vector3<f64>,
    /// m/s²/√Hz
    pub accel_noise_density: f64,
    /// rad/s/√Hz
    pub gyro_noise_density: f64,
    pub gravity: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self::ideal()
    }
}

impl SensorSpec {
    pub fn ideal() -> Self {
        Self {
            accel_bias: Vector3::zeros(),
            gyro_bias: Vector3::zeros(),
            accel_noise_density: 0.0,
            gyro_noise_density: 0.0,
            gravity: DEFAULT_GRAVITY,
        }
    }

    /// Builds a spec from datasheet units, applying the same bias on every axis.
    pub fn from_datasheet(gyro_bias_dps: f64, gyro_noise_dps_rthz: f64, accel_bias_mg: f64, accel_noise_ug_rthz: f64) -> Self {
        let gyro_bias = gyro_bias_dps.to_radians();
        let accel_bias = accel_bias_mg * 1e-3 * STANDARD_GRAVITY;
        Self {
            accel_bias: Vector3::repeat(accel_bias),
            gyro_bias: Vector3::repeat(gyro_bias),
            accel_noise_density: accel_noise_ug_rthz * 1e-6 * STANDARD_GRAVITY,
            gyro_noise_density: gyro_noise_dps_rthz.to_radians(),
            gravity: DEFAULT_GRAVITY,
        }
    }

    /// TDK InvenSense MPU-6500 (Galaxy S6): 6 °/s, 0.01 °/s/√Hz, 60 mg, 300 µg/√Hz.
    pub fn mpu6500() -> Self {
        Self::from_datasheet(6.0, 0.01, 60.0, 300.0)
    }

    /// STMicroelectronics LSM6DSL (Galaxy S8): 3 °/s, 0.004 °/s/√Hz, 40 mg, 130 µg/√Hz.
    pub fn lsm6dsl() -> Self {
        Self::from_datasheet(3.0, 0.004, 40.0, 130.0)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mpu6500" | "s6" => Some(Self::mpu6500()),
            "lsm6dsl" | "s8" => Some(Self::lsm6dsl()),
            "ideal" | "zero" | "none" => Some(Self::ideal()),
            _ => None,
        }
    }

    pub fn bias_only(&self) -> Self {
        Self { accel_noise_density: 0.0, gyro_noise_density: 0.0, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accel_noise_density >= 0.0 && self.gyro_noise_density >= 0.0) {
            return Err(Error::Config("noise densities must be non-negative".into()));
        }
        if !(self.gravity.is_finite() && self.gravity > 0.0) {
            return Err(Error::Config("gravity must be positive".into()));
        }
        Ok(())
    }
}

/// Axis convention shared by every module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameConventions {
    pub forward: Vector3<f64>,
    pub right: Vector3<f64>,
    pub down: Vector3<f64>,
    /// Stationary specific force of a level unit, body frame.
    pub stationary_specific_force: Vector3<f64>,
    /// Gravity in the navigation frame.
    pub gravity_nav: Vector3<f64>,
}

pub fn frame_conventions() -> FrameConventions {
    frame_conventions_with_gravity(DEFAULT_GRAVITY)
}

pub fn frame_conventions_with_gravity(g: f64) -> FrameConventions {
    FrameConventions {
        forward: Vector3::x(),
        right: Vector3::y(),
        down: Vector3::z(),
        stationary_specific_force: Vector3::new(0.0, 0.0, -g),
        gravity_nav: Vector3::new(0.0, 0.0, g),
    }
}

/// Cross-product (skew-symmetric) matrix: `skew(a) * b == a × b`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Yaw-only body-to-navigation rotation.
pub fn yaw_rotation(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}
