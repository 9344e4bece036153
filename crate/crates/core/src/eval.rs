//! Batch evaluation over a manifest of recordings: endpoint errors of the
//! strapdown variants and of the periodic-motion estimator, gain training on
//! the train split, and grouped summary tables.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calib::{auto_calibrate, CalibMode};
use crate::error::{Error, Result};
use crate::ingest::{parse_imu_log, FormatConfig};
use crate::morpi::{endpoint_error, estimate_gain, run_morpi, sha256_hex, MorpiConfig, MorpiMode, WeinbergGain};
use crate::strapdown::{mechanize_2d, mechanize_3d, PlanarState};
use crate::types::{ImuSequence, NavState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    /// Trajectory family, e.g. `straight`, `periodic-short`, `l-shape`.
    pub trajectory: String,
    pub device: String,
    /// Peak-to-peak period label, e.g. `1m`.
    #[serde(default)]
    pub period: Option<String>,
    pub split: Split,
    /// Known travelled distance, m.
    pub distance: f64,
    /// Truth endpoint in the start frame; `(distance, 0)` when absent.
    #[serde(default)]
    pub truth_endpoint: Option<[f64; 2]>,
    /// Overrides the manifest-wide log format.
    #[serde(default)]
    pub format: Option<FormatConfig>,
}

impl ManifestEntry {
    pub fn truth(&self) -> Vector2<f64> {
        self.truth_endpoint.map_or(Vector2::new(self.distance, 0.0), |[x, y]| Vector2::new(x, y))
    }

    pub fn label(&self) -> String {
        self.path.file_name().map_or_else(|| self.path.display().to_string(), |n| n.to_string_lossy().into_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(default)]
    pub format: FormatConfig,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative entry paths are resolved against.
    #[serde(skip)]
    pub root: PathBuf,
    /// SHA-256 of the manifest file contents.
    #[serde(skip)]
    pub hash: Option<String>,
}

impl RunManifest {
    pub fn from_json(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut m: RunManifest = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line() as u64, message: e.to_string() })?;
        m.root = root.into();
        m.hash = Some(sha256_hex(text.as_bytes()));
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            if !(e.distance.is_finite() && e.distance > 0.0) {
                return Err(Error::Config(format!("{}: known distance must be positive", e.path.display())));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    pub fn load_recording(&self, entry: &ManifestEntry) -> Result<ImuSequence> {
        let file = fs::File::open(self.resolve(entry))?;
        parse_imu_log(file, entry.format.as_ref().unwrap_or(&self.format))
    }

    pub fn select<'a>(&'a self, filter: &'a EntryFilter) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.entries.iter().filter(move |e| filter.matches(e))
    }
}

/// Entry selection; `None` fields match anything.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntryFilter {
    pub trajectory: Option<String>,
    pub device: Option<String>,
    pub period: Option<String>,
    pub split: Option<Split>,
}

impl EntryFilter {
    pub fn matches(&self, e: &ManifestEntry) -> bool {
        self.trajectory.as_ref().is_none_or(|t| *t == e.trajectory)
            && self.device.as_ref().is_none_or(|d| *d == e.device)
            && self.period.as_ref().is_none_or(|p| e.period.as_ref() == Some(p))
            && self.split.is_none_or(|s| s == e.split)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2d")]
    Planar,
    #[serde(rename = "3d")]
    Spatial,
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dim::Planar => "2D",
            Dim::Spatial => "3D",
        })
    }
}

impl FromStr for Dim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "2d" | "2" => Ok(Dim::Planar),
            "3d" | "3" => Ok(Dim::Spatial),
            other => Err(Error::Config(format!("unknown mechanization {other:?}, expected 2D or 3D"))),
        }
    }
}

/// Which estimator produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Ins(Dim, CalibMode),
    Morpi(MorpiMode, CalibMode),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ins(d, c) => write!(f, "{d}-INS-{c}"),
            Method::Morpi(m, c) => write!(f, "MoRPI-{m}-{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub label: String,
    pub method: Method,
    pub endpoint: [f64; 2],
    pub error_m: f64,
    pub error_pct: f64,
}

/// Strapdown endpoint error of one recording.
pub fn evaluate_ins(seq: &ImuSequence, entry: &ManifestEntry, dim: Dim, calib: CalibMode, cfg: &MorpiConfig) -> Result<RunResult> {
    let (corrected, _) = auto_calibrate(seq, calib, &cfg.peaks.stationary, &cfg.calib)?;
    let nav = match dim {
        Dim::Spatial => mechanize_3d(&corrected, &NavState::default(), cfg.gravity)?,
        Dim::Planar => mechanize_2d(&corrected, &PlanarState::default())?,
    };
    let end = nav.planar_position(nav.len() - 1);
    let (error_m, error_pct) = endpoint_error(&end, &entry.truth(), entry.distance)?;
    Ok(RunResult { label: entry.label(), method: Method::Ins(dim, calib), endpoint: [end.x, end.y], error_m, error_pct })
}

/// Periodic-motion endpoint error of one recording.
pub fn evaluate_morpi(
    seq: &ImuSequence,
    entry: &ManifestEntry,
    mode: MorpiMode,
    calib: CalibMode,
    gain: &WeinbergGain,
    cfg: &MorpiConfig,
) -> Result<RunResult> {
    let track = run_morpi(seq, mode, calib, gain, cfg)?;
    let end = track.endpoint();
    let (error_m, error_pct) = endpoint_error(&end, &entry.truth(), entry.distance)?;
    Ok(RunResult { label: entry.label(), method: Method::Morpi(mode, calib), endpoint: [end.x, end.y], error_m, error_pct })
}

/// Per-recording outcomes (failures kept in order) and their aggregate.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub rows: Vec<(String, Result<RunResult, String>)>,
}

impl ResultTable {
    pub fn successes(&self) -> impl Iterator<Item = &RunResult> {
        self.rows.iter().filter_map(|(_, r)| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.rows.iter().filter_map(|(l, r)| r.as_ref().err().map(|e| (l.as_str(), e.as_str())))
    }

    pub fn summary(&self) -> Option<Summary> {
        Summary::of(&self.successes().cloned().collect::<Vec<_>>())
    }
}

/// Aggregate endpoint statistics. Both the variance of the error magnitudes
/// and the total variance of the endpoint positions are reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub mean_error_m: f64,
    pub mean_error_pct: f64,
    pub error_variance_m2: f64,
    pub endpoint_variance_m2: f64,
}

impl Summary {
    pub fn of(results: &[RunResult]) -> Option<Self> {
        if results.is_empty() {
            return None;
        }
        let n = results.len() as f64;
        let mean_error_m = results.iter().map(|r| r.error_m).sum::<f64>() / n;
        let mean_error_pct = results.iter().map(|r| r.error_pct).sum::<f64>() / n;
        let error_variance_m2 = results.iter().map(|r| (r.error_m - mean_error_m).powi(2)).sum::<f64>() / n;
        let cx = results.iter().map(|r| r.endpoint[0]).sum::<f64>() / n;
        let cy = results.iter().map(|r| r.endpoint[1]).sum::<f64>() / n;
        let endpoint_variance_m2 =
            results.iter().map(|r| (r.endpoint[0] - cx).powi(2) + (r.endpoint[1] - cy).powi(2)).sum::<f64>() / n;
        Some(Self { runs: results.len(), mean_error_m, mean_error_pct, error_variance_m2, endpoint_variance_m2 })
    }
}

fn run_all<F>(manifest: &RunManifest, entries: &[&ManifestEntry], f: F) -> ResultTable
where
    F: Fn(&ImuSequence, &ManifestEntry) -> Result<RunResult> + Sync,
{
    let rows = entries
        .par_iter()
        .map(|e| {
            let out = manifest.load_recording(e).and_then(|seq| f(&seq, e));
            if let Err(err) = &out {
                warn!("{}: {err}", e.label());
            }
            (e.label(), out.map_err(|err| err.to_string()))
        })
        .collect();
    ResultTable { rows }
}

pub fn ins_table(manifest: &RunManifest, filter: &EntryFilter, dim: Dim, calib: CalibMode, cfg: &MorpiConfig) -> ResultTable {
    let entries: Vec<_> = manifest.select(filter).collect();
    run_all(manifest, &entries, |seq, e| evaluate_ins(seq, e, dim, calib, cfg))
}

pub fn morpi_table(
    manifest: &RunManifest,
    filter: &EntryFilter,
    mode: MorpiMode,
    calib: CalibMode,
    gain: &WeinbergGain,
    cfg: &MorpiConfig,
) -> ResultTable {
    let entries: Vec<_> = manifest.select(filter).collect();
    run_all(manifest, &entries, |seq, e| evaluate_morpi(seq, e, mode, calib, gain, cfg))
}

/// Trains a gain on the selected entries (normally the train split) and
/// stamps it with the manifest hash.
pub fn train_gain(manifest: &RunManifest, filter: &EntryFilter, mode: MorpiMode, cfg: &MorpiConfig) -> Result<WeinbergGain> {
    let runs: Vec<(ImuSequence, f64)> = manifest
        .select(filter)
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|e| match manifest.load_recording(e) {
            Ok(seq) => Some((seq, e.distance)),
            Err(err) => {
                warn!("{}: {err}, skipped", e.label());
                None
            }
        })
        .collect();
    let mut gain = estimate_gain(&runs, mode, &cfg.peaks)?;
    gain.manifest_hash = manifest.hash.clone();
    Ok(gain)
}

/// Raw mean errors per method plus pairwise ratios `row / column`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub methods: Vec<(String, f64)>,
    /// `(a, b, error_a / error_b)` for every ordered pair.
    pub ratios: Vec<(String, String, f64)>,
}

impl Comparison {
    pub fn new(methods: Vec<(String, f64)>) -> Self {
        let mut ratios = Vec::new();
        for (a, ea) in &methods {
            for (b, eb) in &methods {
                if a != b && *eb > 0.0 {
                    ratios.push((a.clone(), b.clone(), ea / eb));
                }
            }
        }
        Self { methods, ratios }
    }
}

/// Groups summaries by an arbitrary key, preserving key order.
pub fn group_summaries<K: Ord>(results: impl IntoIterator<Item = (K, RunResult)>) -> BTreeMap<K, Summary> {
    let mut groups: BTreeMap<K, Vec<RunResult>> = BTreeMap::new();
    for (k, r) in results {
        groups.entry(k).or_default().push(r);
    }
    groups.into_iter().filter_map(|(k, v)| Summary::of(&v).map(|s| (k, s))).collect()
}
