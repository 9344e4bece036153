//! Delimited-text IMU logs and stationary-window detection.
//!
//! The canonical log is comma separated with a `t,fx,fy,fz,wx,wy,wz` header in
//! SI units, optionally preceded by `# key: value` metadata lines. Foreign
//! layouts are mapped onto it with a [`FormatConfig`].

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ImuSample, ImuSequence, DEFAULT_GRAVITY};

pub const CANONICAL_HEADER: [&str; 7] = ["t", "fx", "fy", "fz", "wx", "wy", "wz"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl From<&str> for ColumnRef {
    fn from(s: &str) -> Self {
        ColumnRef::Name(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub t: ColumnRef,
    pub fx: ColumnRef,
    pub fy: ColumnRef,
    pub fz: ColumnRef,
    pub wx: ColumnRef,
    pub wy: ColumnRef,
    pub wz: ColumnRef,
}

impl Default for ColumnMap {
    fn default() -> Self {
        let [t, fx, fy, fz, wx, wy, wz] = CANONICAL_HEADER.map(ColumnRef::from);
        Self { t, fx, fy, fz, wx, wy, wz }
    }
}

impl ColumnMap {
    /// Plain positional layout `t, fx, fy, fz, wx, wy, wz`.
    pub fn positional() -> Self {
        let [t, fx, fy, fz, wx, wy, wz] = [0, 1, 2, 3, 4, 5, 6].map(ColumnRef::Index);
        Self { t, fx, fy, fz, wx, wy, wz }
    }

    fn refs(&self) -> [&ColumnRef; 7] {
        [&self.t, &self.fx, &self.fy, &self.fz, &self.wx, &self.wy, &self.wz]
    }
}

/// Maps a source table onto the canonical sample layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormatConfig {
    pub delimiter: char,
    pub has_header: bool,
    /// Lines starting with this character are skipped; `# key: value` lines
    /// before the header are kept as sequence metadata.
    pub comment: Option<char>,
    pub columns: ColumnMap,
    /// Multiplier taking the time column to seconds (1e-9 for nanoseconds).
    pub time_scale: f64,
    /// Multiplier taking accelerometer columns to m/s².
    pub accel_scale: f64,
    /// Multiplier taking gyroscope columns to rad/s.
    pub gyro_scale: f64,
    /// Subtract the first timestamp so the sequence starts at zero.
    pub rebase_time: bool,
    /// Row-major sensor-to-body axis matrix, applied to both triads.
    pub axis_map: [[f64; 3]; 3],
    /// Overrides the median-spacing rate estimate.
    pub nominal_rate_hz: Option<f64>,
}

impl Default for FormatConfig {
    fn default() -> Self {
        Self {
            delimiter: ',',
            has_header: true,
            comment: Some('#'),
            columns: ColumnMap::default(),
            time_scale: 1.0,
            accel_scale: 1.0,
            gyro_scale: 1.0,
            rebase_time: false,
            axis_map: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            nominal_rate_hz: None,
        }
    }
}

impl FormatConfig {
    pub fn axis_matrix(&self) -> Matrix3<f64> {
        let m = &self.axis_map;
        Matrix3::new(m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2])
    }

    fn validate(&self) -> Result<()> {
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(format!("delimiter {:?} is not ASCII", self.delimiter)));
        }
        if matches!(self.comment, Some(c) if !c.is_ascii()) {
            return Err(Error::Config("comment character must be ASCII".into()));
        }
        for (name, s) in [("time_scale", self.time_scale), ("accel_scale", self.accel_scale), ("gyro_scale", self.gyro_scale)] {
            if !(s.is_finite() && s != 0.0) {
                return Err(Error::Config(format!("{name} must be finite and non-zero")));
            }
        }
        let m = self.axis_matrix();
        if (m.transpose() * m - Matrix3::identity()).amax() > 1e-9 {
            return Err(Error::Config("axis_map must be orthonormal".into()));
        }
        if !self.columns.refs().iter().any(|c| matches!(c, ColumnRef::Name(_))) || self.has_header {
            Ok(())
        } else {
            Err(Error::Config("named columns require has_header = true".into()))
        }
    }
}

/// Parses a delimited IMU log into a validated sequence.
pub fn parse_imu_log<R: Read>(mut source: R, cfg: &FormatConfig) -> Result<ImuSequence> {
    cfg.validate()?;
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let meta = cfg.comment.map(|c| leading_meta(&text, c)).unwrap_or_default();

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter as u8)
        .has_headers(cfg.has_header)
        .comment(cfg.comment.map(|c| c as u8))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header: Option<Vec<String>> = if cfg.has_header {
        let h = reader.headers().map_err(csv_error)?;
        if h.is_empty() || (h.len() == 1 && h[0].is_empty()) {
            return Err(Error::Structure("empty log: no header row".into()));
        }
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };
    let indices = resolve_columns(&cfg.columns, header.as_deref())?;

    let axes = cfg.axis_matrix();
    let mut samples = Vec::new();
    let mut t0 = None;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut vals = [0.0f64; 7];
        for (slot, &idx) in vals.iter_mut().zip(indices.iter()) {
            let field = record.get(idx).ok_or_else(|| Error::Parse {
                line,
                message: format!("row has {} fields, column {idx} missing", record.len()),
            })?;
            *slot = field
                .parse::<f64>()
                .map_err(|e| Error::Parse { line, message: format!("field {idx} ({field:?}): {e}") })?;
        }
        let mut t = vals[0] * cfg.time_scale;
        if cfg.rebase_time {
            t -= *t0.get_or_insert(t);
        }
        let f = axes * Vector3::new(vals[1], vals[2], vals[3]) * cfg.accel_scale;
        let w = axes * Vector3::new(vals[4], vals[5], vals[6]) * cfg.gyro_scale;
        samples.push(ImuSample::new(t, f, w));
    }
    if samples.is_empty() {
        return Err(Error::Structure("log contains no samples".into()));
    }
    let mut seq = match cfg.nominal_rate_hz {
        Some(rate) => ImuSequence::with_rate(samples, rate)?,
        None => ImuSequence::new(samples)?,
    };
    seq.meta = meta;
    Ok(seq)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse { line, message: e.to_string() }
}

fn leading_meta(text: &str, comment: char) -> BTreeMap<String, String> {
    text.lines()
        .take_while(|l| l.starts_with(comment) || l.trim().is_empty())
        .filter_map(|l| {
            let body = l.strip_prefix(comment)?.trim();
            let (k, v) = body.split_once(':')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn resolve_columns(map: &ColumnMap, header: Option<&[String]>) -> Result<[usize; 7]> {
    let mut out = [0usize; 7];
    for (slot, (col, label)) in out.iter_mut().zip(map.refs().into_iter().zip(CANONICAL_HEADER)) {
        *slot = match (col, header) {
            (ColumnRef::Index(i), Some(h)) if *i >= h.len() => {
                return Err(Error::Config(format!("column {label}: index {i} beyond {} header fields", h.len())));
            }
            (ColumnRef::Index(i), _) => *i,
            (ColumnRef::Name(name), Some(h)) => h
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| Error::Config(format!("column {label}: header has no field named {name:?}")))?,
            (ColumnRef::Name(name), None) => {
                return Err(Error::Config(format!("column {label}: named column {name:?} needs a header")));
            }
        };
    }
    Ok(out)
}

/// Writes the canonical format. Values use the shortest representation that
/// parses back to the identical `f64`.
pub fn write_imu_log<W: Write>(seq: &ImuSequence, mut out: W) -> Result<()> {
    for (k, v) in &seq.meta {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "{}", CANONICAL_HEADER.join(","))?;
    for s in seq.samples() {
        writeln!(out, "{},{},{},{},{},{},{}", s.t, s.f.x, s.f.y, s.f.z, s.w.x, s.w.y, s.w.z)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryWindow {
    pub start_idx: usize,
    /// Exclusive.
    pub end_idx: usize,
    /// Seconds, at the owning sequence's nominal rate.
    pub duration: f64,
}

impl StationaryWindow {
    pub fn len(&self) -> usize {
        self.end_idx - self.start_idx
    }

    pub fn is_empty(&self) -> bool {
        self.end_idx <= self.start_idx
    }

    /// Same window shortened to at most `max_s` seconds from its start.
    pub fn truncated(&self, max_s: f64, rate_hz: f64) -> Self {
        let max_len = (max_s * rate_hz).round() as usize;
        let len = self.len().min(max_len.max(1));
        Self { start_idx: self.start_idx, end_idx: self.start_idx + len, duration: len as f64 / rate_hz }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationaryConfig {
    /// Sliding window length, s.
    pub window_s: f64,
    /// Threshold on the std of ‖ω‖, rad/s.
    pub gyro_std_max: f64,
    /// Threshold on the std of ‖f‖ − g, m/s².
    pub accel_std_max: f64,
    pub min_duration_s: f64,
    pub gravity: f64,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self { window_s: 0.5, gyro_std_max: 0.02, accel_std_max: 0.15, min_duration_s: 1.0, gravity: DEFAULT_GRAVITY }
    }
}

/// Maximal runs of samples covered by a quiet sliding window, sorted by start.
pub fn detect_stationary(seq: &ImuSequence, cfg: &StationaryConfig) -> Vec<StationaryWindow> {
    let n = seq.len();
    if n == 0 {
        return Vec::new();
    }
    let width = ((cfg.window_s * seq.rate_hz()).round() as usize).clamp(2, n.max(2)).min(n);
    let gyro: Vec<f64> = seq.samples().iter().map(|s| s.w.norm()).collect();
    let accel: Vec<f64> = seq.samples().iter().map(|s| s.f.norm() - cfg.gravity).collect();
    let gyro_std = MovingStd::new(&gyro);
    let accel_std = MovingStd::new(&accel);

    // difference array of window coverage
    let mut cover = vec![0i64; n + 1];
    for start in 0..=(n - width) {
        let end = start + width;
        if gyro_std.std(start, end) < cfg.gyro_std_max && accel_std.std(start, end) < cfg.accel_std_max {
            cover[start] += 1;
            cover[end] -= 1;
        }
    }

    let min_len = (cfg.min_duration_s * seq.rate_hz()).ceil() as usize;
    let mut windows = Vec::new();
    let mut depth = 0i64;
    let mut run_start = None;
    for (i, delta) in cover.iter().enumerate() {
        depth += delta;
        match (depth > 0 && i < n, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s >= min_len {
                    windows.push(StationaryWindow { start_idx: s, end_idx: i, duration: (i - s) as f64 / seq.rate_hz() });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    windows
}

struct MovingStd {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl MovingStd {
    fn new(x: &[f64]) -> Self {
        let mut sum = Vec::with_capacity(x.len() + 1);
        let mut sum_sq = Vec::with_capacity(x.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        sum.push(a);
        sum_sq.push(b);
        for v in x {
            a += v;
            b += v * v;
            sum.push(a);
            sum_sq.push(b);
        }
        Self { sum, sum_sq }
    }

    fn std(&self, start: usize, end: usize) -> f64 {
        let n = (end - start) as f64;
        let mean = (self.sum[end] - self.sum[start]) / n;
        let var = (self.sum_sq[end] - self.sum_sq[start]) / n - mean * mean;
        var.max(0.0).sqrt()
    }
}

/// `[start, end)` sample range of the moving portion: after the head
/// stationary window and before the tail one.
pub fn motion_bounds(n: usize, windows: &[StationaryWindow]) -> (usize, usize) {
    let half = n / 2;
    let start = windows.first().filter(|w| w.start_idx < half).map_or(0, |w| w.end_idx);
    let end = windows
        .last()
        .filter(|w| w.end_idx > half && w.start_idx >= start)
        .map_or(n, |w| w.start_idx);
    (start, end.max(start))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_seq(n: usize, rate: f64, f: Vector3<f64>, w: Vector3<f64>) -> ImuSequence {
        ImuSequence::new((0..n).map(|i| ImuSample::new(i as f64 / rate, f, w)).collect()).unwrap()
    }

    fn canonical_text(rows: usize) -> String {
        let mut s = String::from("t,fx,fy,fz,wx,wy,wz\n");
        for i in 0..rows {
            s.push_str(&format!("{},{},0.1,-9.81,0,0,{}\n", i as f64 * 0.01, i as f64 * 1e-3, (i as f64).sin()));
        }
        s
    }

    #[test]
    fn parses_500_rows_at_100hz() {
        let seq = parse_imu_log(canonical_text(500).as_bytes(), &FormatConfig::default()).unwrap();
        assert_eq!(seq.len(), 500);
        assert!((seq.rate_hz() - 100.0).abs() < 1e-6);
        assert_eq!(seq.samples()[3].f.y, 0.1);
    }

    #[test]
    fn empty_file_is_structural_error() {
        let err = parse_imu_log("".as_bytes(), &FormatConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "{err}");
        let err = parse_imu_log("t,fx,fy,fz,wx,wy,wz\n".as_bytes(), &FormatConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Structure(_)), "{err}");
    }

    #[test]
    fn duplicated_timestamp_is_rejected() {
        let text = "t,fx,fy,fz,wx,wy,wz\n0,0,0,0,0,0,0\n0.01,0,0,0,0,0,0\n0.01,0,0,0,0,0,0\n";
        let err = parse_imu_log(text.as_bytes(), &FormatConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTime { .. }), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = "t,fx,fy,fz,wx,wy,wz\n0,0,0,0,0,0,0\n0.01,0,abc,0,0,0,0\n";
        match parse_imu_log(text.as_bytes(), &FormatConfig::default()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_column_is_config_error() {
        let text = "t,fx,fy,fz,wx,wy\n0,0,0,0,0,0\n";
        let err = parse_imu_log(text.as_bytes(), &FormatConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn foreign_layout_with_units_and_axes() {
        // nanosecond time, accel in g, gyro in deg/s, columns shuffled, sensor y/x swapped
        let text = "gz;ax;ay;az;gx;gy;ts\n0;0;1;-1;0;0;1000000000\n90;0;0;-1;0;0;1010000000\n";
        let cfg = FormatConfig {
            delimiter: ';',
            columns: ColumnMap {
                t: "ts".into(),
                fx: "ax".into(),
                fy: "ay".into(),
                fz: "az".into(),
                wx: "gx".into(),
                wy: "gy".into(),
                wz: "gz".into(),
            },
            time_scale: 1e-9,
            rebase_time: true,
            accel_scale: 9.80665,
            gyro_scale: std::f64::consts::PI / 180.0,
            axis_map: [[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]],
            ..FormatConfig::default()
        };
        let seq = parse_imu_log(text.as_bytes(), &cfg).unwrap();
        assert_eq!(seq.samples()[0].t, 0.0);
        assert!((seq.samples()[1].t - 0.01).abs() < 1e-12);
        assert!((seq.samples()[0].f.x - 9.80665).abs() < 1e-12);
        assert!((seq.samples()[0].f.z - 9.80665).abs() < 1e-12);
        assert!((seq.samples()[1].w.z + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn headerless_positional() {
        let text = "0 0 0 -9.81 0 0 0\n0.01 0 0 -9.81 0 0 0\n";
        let cfg = FormatConfig { delimiter: ' ', has_header: false, columns: ColumnMap::positional(), ..Default::default() };
        assert_eq!(parse_imu_log(text.as_bytes(), &cfg).unwrap().len(), 2);
        let named = FormatConfig { delimiter: ' ', has_header: false, ..Default::default() };
        assert!(matches!(parse_imu_log(text.as_bytes(), &named), Err(Error::Config(_))));
    }

    #[test]
    fn canonical_round_trip_keeps_meta() {
        let seq = parse_imu_log(canonical_text(50).as_bytes(), &FormatConfig::default())
            .unwrap()
            .with_meta("device", "s8");
        let mut buf = Vec::new();
        write_imu_log(&seq, &mut buf).unwrap();
        let back = parse_imu_log(buf.as_slice(), &FormatConfig::default()).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn stationary_fully_quiet_sequence() {
        let seq = constant_seq(400, 100.0, Vector3::new(0.0, 0.0, -9.81), Vector3::new(0.01, 0.0, 0.0));
        let w = detect_stationary(&seq, &StationaryConfig::default());
        assert_eq!(w.len(), 1);
        assert_eq!((w[0].start_idx, w[0].end_idx), (0, 400));
        assert!((w[0].duration - 4.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_none_in_motion() {
        let samples = (0..400)
            .map(|i| {
                let t = i as f64 / 100.0;
                ImuSample::new(t, Vector3::new(0.0, 2.0 * (6.0 * t).sin(), -9.81), Vector3::new(0.0, 0.0, (6.0 * t).cos()))
            })
            .collect();
        let seq = ImuSequence::new(samples).unwrap();
        assert!(detect_stationary(&seq, &StationaryConfig::default()).is_empty());
    }

    #[test]
    fn short_quiet_stretch_is_dropped() {
        // 0.6 s of quiet is below the 1 s minimum
        let samples = (0..300)
            .map(|i| {
                let t = i as f64 / 100.0;
                let moving = i >= 60;
                let a = if moving { 2.0 * (6.0 * t).sin() } else { 0.0 };
                let r = if moving { (6.0 * t).cos() } else { 0.0 };
                ImuSample::new(t, Vector3::new(0.0, a, -9.81), Vector3::new(0.0, 0.0, r))
            })
            .collect();
        let seq = ImuSequence::new(samples).unwrap();
        assert!(detect_stationary(&seq, &StationaryConfig::default()).is_empty());
    }

    #[test]
    fn bounds_between_head_and_tail() {
        let head = StationaryWindow { start_idx: 0, end_idx: 300, duration: 3.0 };
        let tail = StationaryWindow { start_idx: 900, end_idx: 1200, duration: 3.0 };
        assert_eq!(motion_bounds(1200, &[head, tail]), (300, 900));
        assert_eq!(motion_bounds(1200, &[head]), (300, 1200));
        assert_eq!(motion_bounds(1200, &[tail]), (0, 900));
        assert_eq!(motion_bounds(1200, &[]), (0, 1200));
    }

    #[test]
    fn truncation_caps_duration() {
        let w = StationaryWindow { start_idx: 5, end_idx: 505, duration: 5.0 };
        let t = w.truncated(3.0, 100.0);
        assert_eq!((t.start_idx, t.end_idx), (5, 305));
    }
}
