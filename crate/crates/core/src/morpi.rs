//! Periodic-motion dead reckoning.
//!
//! The moving part of a recording is cut at the local maxima of either the
//! lateral specific force (mode A) or the yaw rate (mode G). Each segment's
//! length follows the Weinberg relation `s = G·(max − min)^¼` over that
//! segment, and positions are accumulated along the heading taken from the
//! strapdown attitude at the start of each segment.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::warn;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calib::{auto_calibrate, CalibConfig, CalibMode};
use crate::error::{Error, Result};
use crate::ingest::{detect_stationary, motion_bounds, StationaryConfig};
use crate::kv::KvFile;
use crate::signal;
use crate::strapdown::{mechanize_3d, NavSolution};
use crate::types::{wrap_angle, ImuSample, ImuSequence, NavState, DEFAULT_GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MorpiMode {
    /// Accelerometer y-axis.
    A,
    /// Gyroscope z-axis.
    G,
}

impl MorpiMode {
    pub fn signal(self, s: &ImuSample) -> f64 {
        match self {
            MorpiMode::A => s.f.y,
            MorpiMode::G => s.w.z,
        }
    }

    pub fn signal_name(self) -> &'static str {
        match self {
            MorpiMode::A => "accel-y",
            MorpiMode::G => "gyro-z",
        }
    }
}

impl fmt::Display for MorpiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MorpiMode::A => "A",
            MorpiMode::G => "G",
        })
    }
}

impl FromStr for MorpiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" | "accel" | "accel-y" => Ok(MorpiMode::A),
            "g" | "gyro" | "gyro-z" => Ok(MorpiMode::G),
            other => Err(Error::Config(format!("unknown mode {other:?}, expected A or G"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakConfig {
    /// Zero-phase low-pass cutoff, Hz; `None` disables filtering.
    pub cutoff_hz: Option<f64>,
    /// Minimum peak spacing as a fraction of the median candidate interval.
    pub separation_fraction: f64,
    /// Minimum prominence as a fraction of the signal inter-quartile range.
    pub prominence_fraction: f64,
    pub stationary: StationaryConfig,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self { cutoff_hz: Some(5.0), separation_fraction: 0.3, prominence_fraction: 0.2, stationary: StationaryConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeakSet {
    /// Interior peak indices, strictly increasing.
    pub indices: Vec<usize>,
    pub kind: MorpiMode,
    /// `[start, end)` of the moving portion.
    pub motion_bounds: (usize, usize),
    pub min_separation: usize,
}

impl PeakSet {
    /// Segment boundaries: motion start, every peak, last moving sample.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut b = Vec::with_capacity(self.indices.len() + 2);
        b.push(self.motion_bounds.0);
        b.extend_from_slice(&self.indices);
        b.push(self.motion_bounds.1 - 1);
        b
    }

    pub fn segment_count(&self) -> usize {
        self.indices.len() + 1
    }

    /// Inclusive sample range of segment `k`.
    pub fn segment(&self, k: usize) -> Result<(usize, usize)> {
        let b = self.boundaries();
        if k + 1 >= b.len() {
            return Err(Error::IndexOutOfRange { index: k, len: b.len() - 1 });
        }
        Ok((b[k], b[k + 1]))
    }

    /// Coefficient of variation of the peak-to-peak intervals; `None` with
    /// fewer than two intervals.
    pub fn interval_cv(&self) -> Option<f64> {
        if self.indices.len() < 3 {
            return None;
        }
        let d: Vec<f64> = self.indices.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64;
        Some(var.sqrt() / mean)
    }
}

/// Finds the segment-boundary peaks of the mode's signal inside the moving
/// portion of `seq`.
pub fn detect_peaks(seq: &ImuSequence, kind: MorpiMode, cfg: &PeakConfig) -> Result<PeakSet> {
    let windows = detect_stationary(seq, &cfg.stationary);
    let bounds = motion_bounds(seq.len(), &windows);
    detect_peaks_within(seq, kind, cfg, bounds)
}

/// As [`detect_peaks`] with explicit `[start, end)` motion bounds.
pub fn detect_peaks_within(seq: &ImuSequence, kind: MorpiMode, cfg: &PeakConfig, bounds: (usize, usize)) -> Result<PeakSet> {
    let (start, end) = bounds;
    if end > seq.len() || end < start + 3 {
        return Err(Error::InsufficientPeriodicity { found: 0 });
    }
    let raw: Vec<f64> = seq.samples().iter().map(|s| kind.signal(s)).collect();
    let filtered = match cfg.cutoff_hz {
        Some(fc) => signal::lowpass_zero_phase(&raw, fc, seq.rate_hz()),
        None => raw,
    };
    let x = &filtered[start..end];
    let q1 = signal::quantile(x, 0.25).unwrap_or(0.0);
    let q3 = signal::quantile(x, 0.75).unwrap_or(0.0);
    let min_prominence = cfg.prominence_fraction * (q3 - q1);

    let candidates: Vec<usize> = signal::local_maxima(x)
        .into_iter()
        .filter(|&i| {
            let p = signal::prominence(x, i);
            p > 0.0 && p >= min_prominence
        })
        .collect();
    let intervals: Vec<f64> = candidates.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let min_separation = signal::median(&intervals).map_or(1, |m| (cfg.separation_fraction * m).round().max(1.0) as usize);
    let kept = signal::enforce_distance(x, &candidates, min_separation);
    if kept.is_empty() {
        return Err(Error::InsufficientPeriodicity { found: 0 });
    }
    Ok(PeakSet { indices: kept.into_iter().map(|i| i + start).collect(), kind, motion_bounds: bounds, min_separation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeinbergGain {
    pub value: f64,
    pub mode: MorpiMode,
    pub training_runs: usize,
    /// Hex SHA-256 of the training manifest, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_hash: Option<String>,
}

impl WeinbergGain {
    pub fn new(value: f64, mode: MorpiMode) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Config(format!("gain must be positive, got {value}")));
        }
        Ok(Self { value, mode, training_runs: 0, manifest_hash: None })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { value: self.value * factor, ..self.clone() }
    }

    pub fn check_mode(&self, requested: MorpiMode) -> Result<()> {
        if self.mode != requested {
            return Err(Error::ModeMismatch { gain: self.mode.to_string(), requested: requested.to_string() });
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("mode", self.mode).set("value", self.value).set("training_runs", self.training_runs);
        if let Some(h) = &self.manifest_hash {
            kv.set("manifest_sha256", h);
        }
        kv
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut gain = Self::new(kv.parse("value")?, kv.parse("mode")?)?;
        gain.training_runs = kv.get("training_runs").map(str::parse).transpose().map_err(|e| Error::Config(format!("training_runs: {e}")))?.unwrap_or(0);
        gain.manifest_hash = kv.get("manifest_sha256").map(str::to_string);
        Ok(gain)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `max − min` of the mode's signal over an inclusive sample range.
pub fn signal_range(seq: &ImuSequence, kind: MorpiMode, segment: (usize, usize)) -> Result<f64> {
    let (a, b) = segment;
    if a > b || b >= seq.len() {
        return Err(Error::IndexOutOfRange { index: b, len: seq.len() });
    }
    let (lo, hi) = seq.samples()[a..=b]
        .iter()
        .map(|s| kind.signal(s))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}

/// `G·range^¼`, with the `range^¼` factor exposed for the error model.
pub fn weinberg_from_range(gain: f64, range: f64) -> f64 {
    gain * range.max(0.0).powf(0.25)
}

/// Weinberg length of one segment (inclusive sample range).
pub fn weinberg_distance(seq: &ImuSequence, segment: (usize, usize), kind: MorpiMode, gain: &WeinbergGain) -> Result<f64> {
    gain.check_mode(kind)?;
    let range = signal_range(seq, kind, segment)?;
    if range == 0.0 {
        warn!("degenerate segment {segment:?}: flat {} signal", kind.signal_name());
    }
    Ok(weinberg_from_range(gain.value, range))
}

/// `Σ (max − min)^¼` over every segment of `peaks`.
pub fn range_root_sum(seq: &ImuSequence, peaks: &PeakSet) -> Result<f64> {
    (0..peaks.segment_count()).map(|k| Ok(signal_range(seq, peaks.kind, peaks.segment(k)?)?.powf(0.25))).sum()
}

/// Per-run gain `D / Σ range^¼`, averaged over runs. Runs without peaks or
/// with a flat signal are skipped with a warning.
pub fn estimate_gain(runs: &[(ImuSequence, f64)], kind: MorpiMode, cfg: &PeakConfig) -> Result<WeinbergGain> {
    let mut gains = Vec::with_capacity(runs.len());
    for (i, (seq, distance)) in runs.iter().enumerate() {
        if !(distance.is_finite() && *distance > 0.0) {
            warn!("run {i}: non-positive known distance {distance}, skipped");
            continue;
        }
        let total = match detect_peaks(seq, kind, cfg).and_then(|p| range_root_sum(seq, &p)) {
            Ok(t) => t,
            Err(e) => {
                warn!("run {i}: {e}, skipped");
                continue;
            }
        };
        if total == 0.0 {
            warn!("run {i}: zero total {} range, skipped", kind.signal_name());
            continue;
        }
        gains.push(distance / total);
    }
    if gains.is_empty() {
        return Err(Error::NoUsableRuns(format!("none of {} training runs produced a gain", runs.len())));
    }
    let mut gain = WeinbergGain::new(gains.iter().sum::<f64>() / gains.len() as f64, kind)?;
    gain.training_runs = gains.len();
    Ok(gain)
}

/// Heading of segment `k` relative to the initial heading, sampled at the
/// segment's first boundary.
pub fn segment_heading(nav: &NavSolution, peaks: &PeakSet, k: usize) -> Result<f64> {
    let (start, _) = peaks.segment(k)?;
    if start >= nav.yaw.len() {
        return Err(Error::IndexOutOfRange { index: start, len: nav.yaw.len() });
    }
    Ok(wrap_angle(nav.yaw[start] - nav.yaw[0]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorpiTrack {
    pub positions: Vec<Vector2<f64>>,
    pub segment_distances: Vec<f64>,
    pub headings: Vec<f64>,
}

impl MorpiTrack {
    pub fn endpoint(&self) -> Vector2<f64> {
        *self.positions.last().expect("track always holds the origin")
    }

    pub fn total_distance(&self) -> f64 {
        self.segment_distances.iter().sum()
    }

    /// Writes `k,s_k,dpsi_k,x_k,y_k`; row 0 is the origin.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,s_k,dpsi_k,x_k,y_k")?;
        for (k, p) in self.positions.iter().enumerate() {
            let (s, h) = if k == 0 { (0.0, 0.0) } else { (self.segment_distances[k - 1], self.headings[k - 1]) };
            writeln!(out, "{k},{s},{h},{},{}", p.x, p.y)?;
        }
        Ok(())
    }
}

pub fn dead_reckon(distances: &[f64], headings: &[f64], origin: Vector2<f64>) -> Result<MorpiTrack> {
    if distances.len() != headings.len() {
        return Err(Error::Structure(format!("{} distances but {} headings", distances.len(), headings.len())));
    }
    let mut positions = Vec::with_capacity(distances.len() + 1);
    positions.push(origin);
    let mut p = origin;
    for (s, psi) in distances.iter().zip(headings) {
        p += Vector2::new(psi.cos(), psi.sin()) * *s;
        positions.push(p);
    }
    Ok(MorpiTrack { positions, segment_distances: distances.to_vec(), headings: headings.to_vec() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MorpiConfig {
    pub peaks: PeakConfig,
    pub calib: CalibConfig,
    pub gravity: f64,
}

impl Default for MorpiConfig {
    fn default() -> Self {
        Self { peaks: PeakConfig::default(), calib: CalibConfig::default(), gravity: DEFAULT_GRAVITY }
    }
}

/// Intermediate products of one pipeline run.
#[derive(Debug, Clone)]
pub struct MorpiRun {
    pub track: MorpiTrack,
    pub peaks: PeakSet,
    pub nav: NavSolution,
}

/// Calibration, peak detection, Weinberg lengths, headings, dead reckoning.
pub fn run_morpi(seq: &ImuSequence, mode: MorpiMode, calib_mode: CalibMode, gain: &WeinbergGain, cfg: &MorpiConfig) -> Result<MorpiTrack> {
    run_morpi_detailed(seq, mode, calib_mode, gain, cfg).map(|r| r.track)
}

pub fn run_morpi_detailed(
    seq: &ImuSequence,
    mode: MorpiMode,
    calib_mode: CalibMode,
    gain: &WeinbergGain,
    cfg: &MorpiConfig,
) -> Result<MorpiRun> {
    gain.check_mode(mode)?;
    let (corrected, _) = auto_calibrate(seq, calib_mode, &cfg.peaks.stationary, &cfg.calib)?;
    let peaks = detect_peaks(&corrected, mode, &cfg.peaks)?;
    let nav = mechanize_3d(&corrected, &NavState::default(), cfg.gravity)?;
    let mut distances = Vec::with_capacity(peaks.segment_count());
    let mut headings = Vec::with_capacity(peaks.segment_count());
    for k in 0..peaks.segment_count() {
        distances.push(weinberg_distance(&corrected, peaks.segment(k)?, mode, gain)?);
        headings.push(segment_heading(&nav, &peaks, k)?);
    }
    let track = dead_reckon(&distances, &headings, Vector2::zeros())?;
    Ok(MorpiRun { track, peaks, nav })
}

/// Endpoint distance to truth, in metres and as a percentage of the
/// travelled distance.
pub fn endpoint_error(estimate: &Vector2<f64>, truth: &Vector2<f64>, travelled: f64) -> Result<(f64, f64)> {
    if !(travelled.is_finite() && travelled > 0.0) {
        return Err(Error::Config(format!("travelled distance must be positive, got {travelled}")));
    }
    let e = (estimate - truth).norm();
    Ok((e, 100.0 * e / travelled))
}
