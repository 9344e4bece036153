//! Zero-order (constant-bias) calibration from a stationary window.
//!
//! Three processing variants are supported: raw data (`Rd`), gyro-only
//! correction (`Gc`) and gyro plus accelerometer correction (`Gac`). The
//! accelerometer bias assumes the unit is level during the window, so the
//! expected reading is `(0, 0, -g)` in the x-forward/z-down body frame.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{detect_stationary, StationaryConfig, StationaryWindow};
use crate::kv::KvFile;
use crate::types::{frame_conventions_with_gravity, ImuSample, ImuSequence, DEFAULT_GRAVITY};

/// Gyro biases beyond this indicate a non-stationary window, rad/s.
pub const GYRO_BIAS_SANITY: f64 = 0.5;
/// Accelerometer biases beyond this indicate a non-stationary window, m/s².
pub const ACCEL_BIAS_SANITY: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibMode {
    Rd,
    Gc,
    Gac,
}

impl CalibMode {
    pub fn corrects_gyro(self) -> bool {
        matches!(self, CalibMode::Gc | CalibMode::Gac)
    }

    pub fn corrects_accel(self) -> bool {
        matches!(self, CalibMode::Gac)
    }
}

impl fmt::Display for CalibMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalibMode::Rd => "RD",
            CalibMode::Gc => "GC",
            CalibMode::Gac => "GAC",
        })
    }
}

impl FromStr for CalibMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rd" | "raw" => Ok(CalibMode::Rd),
            "gc" => Ok(CalibMode::Gc),
            "gac" => Ok(CalibMode::Gac),
            other => Err(Error::Config(format!("unknown calibration mode {other:?} (expected RD, GC or GAC)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibConfig {
    pub min_window_s: f64,
    /// The head window is truncated to this length before averaging.
    pub max_window_s: f64,
    pub gravity: f64,
}

impl Default for CalibConfig {
    fn default() -> Self {
        Self { min_window_s: 1.0, max_window_s: 3.0, gravity: DEFAULT_GRAVITY }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibResult {
    pub gyro_bias: Vector3<f64>,
    /// Only estimated for [`CalibMode::Gac`].
    pub accel_bias: Option<Vector3<f64>>,
    pub source_window: StationaryWindow,
}

impl CalibResult {
    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set_vec3("gyro_bias", &self.gyro_bias)
            .set("window_start", self.source_window.start_idx)
            .set("window_end", self.source_window.end_idx)
            .set("window_duration", self.source_window.duration);
        if let Some(a) = &self.accel_bias {
            kv.set_vec3("accel_bias", a);
        }
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let accel_bias = match kv.get("accel_bias") {
            Some(_) => Some(kv.vec3("accel_bias")?),
            None => None,
        };
        Ok(Self {
            gyro_bias: kv.vec3("gyro_bias")?,
            accel_bias,
            source_window: StationaryWindow {
                start_idx: kv.parse("window_start")?,
                end_idx: kv.parse("window_end")?,
                duration: kv.parse("window_duration")?,
            },
        })
    }
}

fn window_samples<'a>(seq: &'a ImuSequence, win: &StationaryWindow, cfg: &CalibConfig) -> Result<&'a [ImuSample]> {
    if win.end_idx > seq.len() || win.is_empty() {
        return Err(Error::Calibration(format!(
            "window {}..{} invalid for a sequence of {} samples",
            win.start_idx,
            win.end_idx,
            seq.len()
        )));
    }
    let duration = win.len() as f64 / seq.rate_hz();
    if duration + 1e-9 < cfg.min_window_s {
        return Err(Error::Calibration(format!(
            "stationary window of {duration:.3} s is shorter than the {:.3} s minimum",
            cfg.min_window_s
        )));
    }
    Ok(&seq.samples()[win.start_idx..win.end_idx])
}

fn mean_of(samples: &[ImuSample], pick: impl Fn(&ImuSample) -> Vector3<f64>) -> Vector3<f64> {
    samples.iter().map(pick).sum::<Vector3<f64>>() / samples.len() as f64
}

/// Per-axis mean angular rate over the window.
pub fn estimate_gyro_bias(seq: &ImuSequence, win: &StationaryWindow, cfg: &CalibConfig) -> Result<Vector3<f64>> {
    let samples = window_samples(seq, win, cfg)?;
    Ok(mean_of(samples, |s| s.w))
}

/// Per-axis mean specific force over the window minus the level-at-rest reading.
pub fn estimate_accel_bias(seq: &ImuSequence, win: &StationaryWindow, cfg: &CalibConfig) -> Result<Vector3<f64>> {
    let samples = window_samples(seq, win, cfg)?;
    let expected = frame_conventions_with_gravity(cfg.gravity).stationary_specific_force;
    Ok(mean_of(samples, |s| s.f) - expected)
}

/// Estimates the biases `mode` needs from `win`.
pub fn calibrate(seq: &ImuSequence, win: &StationaryWindow, mode: CalibMode, cfg: &CalibConfig) -> Result<CalibResult> {
    let gyro_bias = estimate_gyro_bias(seq, win, cfg)?;
    if gyro_bias.amax() >= GYRO_BIAS_SANITY {
        return Err(Error::Calibration(format!(
            "gyro bias {:.3} rad/s exceeds sanity bound; window is probably not stationary",
            gyro_bias.amax()
        )));
    }
    let accel_bias = if mode.corrects_accel() {
        let b = estimate_accel_bias(seq, win, cfg)?;
        if b.amax() >= ACCEL_BIAS_SANITY {
            return Err(Error::Calibration(format!(
                "accelerometer bias {:.3} m/s² exceeds sanity bound; window is probably not stationary or not level",
                b.amax()
            )));
        }
        Some(b)
    } else {
        None
    };
    Ok(CalibResult { gyro_bias, accel_bias, source_window: *win })
}

/// Subtracts the biases selected by `mode`. `Rd` returns the input unchanged.
pub fn apply_calibration(seq: &ImuSequence, calib: &CalibResult, mode: CalibMode) -> ImuSequence {
    if mode == CalibMode::Rd {
        return seq.clone();
    }
    let gyro = if mode.corrects_gyro() { calib.gyro_bias } else { Vector3::zeros() };
    let accel = if mode.corrects_accel() { calib.accel_bias.unwrap_or_else(Vector3::zeros) } else { Vector3::zeros() };
    seq.map_samples(|s| ImuSample::new(s.t, s.f - accel, s.w - gyro))
        .expect("subtracting finite biases keeps samples valid")
}

/// First detected window, truncated to the configured maximum length.
pub fn default_window(seq: &ImuSequence, stationary: &StationaryConfig, cfg: &CalibConfig) -> Option<StationaryWindow> {
    detect_stationary(seq, stationary).first().map(|w| w.truncated(cfg.max_window_s, seq.rate_hz()))
}

/// Detects the head window, estimates biases and applies them.
pub fn auto_calibrate(
    seq: &ImuSequence,
    mode: CalibMode,
    stationary: &StationaryConfig,
    cfg: &CalibConfig,
) -> Result<(ImuSequence, Option<CalibResult>)> {
    if mode == CalibMode::Rd {
        return Ok((seq.clone(), None));
    }
    let win = default_window(seq, stationary, cfg)
        .ok_or_else(|| Error::Calibration("no stationary window found for calibration".into()))?;
    let result = calibrate(seq, &win, mode, cfg)?;
    Ok((apply_calibration(seq, &result, mode), Some(result)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant(n: usize, f: Vector3<f64>, w: Vector3<f64>) -> ImuSequence {
        ImuSequence::new((0..n).map(|i| ImuSample::new(i as f64 * 0.01, f, w)).collect()).unwrap()
    }

    fn whole(seq: &ImuSequence) -> StationaryWindow {
        StationaryWindow { start_idx: 0, end_idx: seq.len(), duration: seq.len() as f64 / seq.rate_hz() }
    }

    const LEVEL: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

    #[test]
    fn gyro_bias_of_constant_is_exact() {
        let w = Vector3::new(0.01, 0.02, -0.03);
        let seq = constant(300, LEVEL, w);
        let b = estimate_gyro_bias(&seq, &whole(&seq), &CalibConfig::default()).unwrap();
        assert_relative_eq!(b, w, epsilon = 1e-15);
        let zero = constant(300, LEVEL, Vector3::zeros());
        assert_eq!(estimate_gyro_bias(&zero, &whole(&zero), &CalibConfig::default()).unwrap(), Vector3::zeros());
    }

    #[test]
    fn accel_bias_against_level_gravity() {
        let seq = constant(300, LEVEL, Vector3::zeros());
        let b = estimate_accel_bias(&seq, &whole(&seq), &CalibConfig::default()).unwrap();
        assert!(b.amax() < 1e-12);
        let shifted = constant(300, LEVEL + Vector3::new(0.4, 0.0, 0.0), Vector3::zeros());
        let b = estimate_accel_bias(&shifted, &whole(&shifted), &CalibConfig::default()).unwrap();
        assert_relative_eq!(b, Vector3::new(0.4, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn short_window_is_rejected() {
        let seq = constant(300, LEVEL, Vector3::zeros());
        let win = StationaryWindow { start_idx: 0, end_idx: 50, duration: 0.5 };
        assert!(matches!(estimate_gyro_bias(&seq, &win, &CalibConfig::default()), Err(Error::Calibration(_))));
        assert!(matches!(estimate_accel_bias(&seq, &win, &CalibConfig::default()), Err(Error::Calibration(_))));
    }

    #[test]
    fn sanity_bound_flags_moving_window() {
        let seq = constant(300, LEVEL, Vector3::new(0.0, 0.0, 0.8));
        assert!(matches!(calibrate(&seq, &whole(&seq), CalibMode::Gc, &CalibConfig::default()), Err(Error::Calibration(_))));
    }

    #[test]
    fn modes_subtract_what_they_should() {
        let seq = constant(300, LEVEL + Vector3::new(0.3, -0.2, 0.1), Vector3::new(0.05, -0.01, 0.02));
        let win = whole(&seq);
        let cfg = CalibConfig::default();

        let rd = calibrate(&seq, &win, CalibMode::Rd, &cfg).unwrap();
        assert_eq!(apply_calibration(&seq, &rd, CalibMode::Rd), seq);

        let gc = calibrate(&seq, &win, CalibMode::Gc, &cfg).unwrap();
        assert!(gc.accel_bias.is_none());
        let out = apply_calibration(&seq, &gc, CalibMode::Gc);
        assert!(out.samples().iter().all(|s| s.w.amax() < 1e-15 && s.f == seq.samples()[0].f));

        let gac = calibrate(&seq, &win, CalibMode::Gac, &cfg).unwrap();
        let out = apply_calibration(&seq, &gac, CalibMode::Gac);
        assert!(out.samples().iter().all(|s| (s.f - LEVEL).amax() < 1e-12));

        // second pass on corrected data finds nothing left
        let again = calibrate(&out, &win, CalibMode::Gac, &cfg).unwrap();
        assert!(again.gyro_bias.amax() < 1e-15);
        assert!(again.accel_bias.unwrap().amax() < 1e-12);
    }

    #[test]
    fn kv_round_trip() {
        let r = CalibResult {
            gyro_bias: Vector3::new(1e-3, -2e-3, 0.5e-3),
            accel_bias: Some(Vector3::new(0.1, 0.2, -0.3)),
            source_window: StationaryWindow { start_idx: 0, end_idx: 300, duration: 3.0 },
        };
        let back = CalibResult::from_kv(&r.to_kv().render().parse().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("GAC".parse::<CalibMode>().unwrap(), CalibMode::Gac);
        assert_eq!("rd".parse::<CalibMode>().unwrap(), CalibMode::Rd);
        assert!("xyz".parse::<CalibMode>().is_err());
    }
}
