use std::fs;
use std::io::{self, Write};
use std::path::Path;

use log::{info, warn};
use morpi::calib::{auto_calibrate, CalibMode};
use morpi::errmodel::{time_grid, ErrorBudget, ErrorInputs, PeriodicSegments};
use morpi::eval::{ins_table, morpi_table, train_gain, Comparison, Dim, EntryFilter, ResultTable, RunManifest, Split};
use morpi::ingest::write_imu_log;
use morpi::kv::KvFile;
use morpi::morpi::{run_morpi, MorpiConfig, MorpiMode, WeinbergGain};
use morpi::simgen::{corrupt, generate_truth, imu_from_truth, TrajectorySpec};
use morpi::strapdown::{mechanize_2d, mechanize_3d, PlanarState};
use morpi::{Error, NavState, SensorSpec};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::read_structured;
use crate::output::{is_json, stem, write_json, TableReport};
use crate::{ErrmodelArgs, EvaluateArgs, GainArgs, InsArgs, MorpiArgs, SimulateArgs};

fn load_manifest(path: &Path) -> Result<RunManifest, Error> {
    let m = RunManifest::load(path)?;
    if m.entries.is_empty() {
        warn!("{}: manifest has no entries", path.display());
    }
    Ok(m)
}

pub fn ins(a: &InsArgs, cfg: &MorpiConfig) -> Result<(), Error> {
    let manifest = load_manifest(&a.select.manifest)?;
    let filter = a.select.filter();
    let table = ins_table(&manifest, &filter, a.dim, a.calib, cfg);
    let report = TableReport::new(format!("{}-INS {}", a.dim, a.calib), &table);
    report.print();
    if let Some(out) = &a.out {
        report.save(out)?;
    }
    if let Some(dir) = &a.export_dir {
        fs::create_dir_all(dir)?;
        for e in manifest.select(&filter) {
            let exported = manifest.load_recording(e).and_then(|seq| {
                let (seq, _) = auto_calibrate(&seq, a.calib, &cfg.peaks.stationary, &cfg.calib)?;
                let nav = match a.dim {
                    Dim::Spatial => mechanize_3d(&seq, &NavState::default(), cfg.gravity)?,
                    Dim::Planar => mechanize_2d(&seq, &PlanarState::default())?,
                };
                nav.write_csv(fs::File::create(dir.join(format!("{}.nav.csv", stem(&e.label()))))?)
            });
            if let Err(err) = exported {
                warn!("{}: export failed: {err}", e.label());
            }
        }
    }
    Ok(())
}

fn read_gain(path: &Path) -> Result<WeinbergGain, Error> {
    let kv: KvFile = fs::read_to_string(path)?.parse()?;
    WeinbergGain::from_kv(&kv)
}

pub fn morpi(a: &MorpiArgs, cfg: &MorpiConfig) -> Result<(), Error> {
    let gain = read_gain(&a.gain)?;
    gain.check_mode(a.mode)?;
    let manifest = load_manifest(&a.select.manifest)?;
    if let (Some(trained), Some(current)) = (&gain.manifest_hash, &manifest.hash) {
        if trained != current {
            info!("gain was trained on a different manifest ({trained})");
        }
    }
    let filter = a.select.filter();
    let table = morpi_table(&manifest, &filter, a.mode, a.calib, &gain, cfg);
    let report = TableReport::new(format!("MoRPI-{} {} (gain {:.6})", a.mode, a.calib, gain.value), &table);
    report.print();
    if let Some(out) = &a.out {
        report.save(out)?;
    }
    if let Some(dir) = &a.export_dir {
        fs::create_dir_all(dir)?;
        for e in manifest.select(&filter) {
            let exported = manifest.load_recording(e).and_then(|seq| {
                let track = run_morpi(&seq, a.mode, a.calib, &gain, cfg)?;
                track.write_csv(fs::File::create(dir.join(format!("{}.track.csv", stem(&e.label()))))?)
            });
            if let Err(err) = exported {
                warn!("{}: export failed: {err}", e.label());
            }
        }
    }
    Ok(())
}

pub fn gain(a: &GainArgs, cfg: &MorpiConfig) -> Result<(), Error> {
    let manifest = load_manifest(&a.select.manifest)?;
    let gain = train_gain(&manifest, &a.select.filter(), a.mode, cfg)?;
    fs::write(&a.out, gain.to_kv().render())?;
    println!("mode {} gain {:.9} from {} runs -> {}", gain.mode, gain.value, gain.training_runs, a.out.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SegmentLayout {
    count: usize,
    duration_s: f64,
    length_m: f64,
}

impl Default for SegmentLayout {
    fn default() -> Self {
        Self { count: 14, duration_s: 1.0, length_m: 0.45 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ErrmodelInputs {
    /// Starting point for the biases; explicit fields override it.
    preset: Option<String>,
    dv0: [f64; 3],
    /// Body frame, z down, m/s².
    accel_bias: Option<[f64; 3]>,
    /// rad/s.
    gyro_bias: Option<[f64; 3]>,
    gravity: Option<f64>,
    dg_fractions: Vec<f64>,
    segments: SegmentLayout,
    end_s: f64,
    step_s: f64,
}

impl Default for ErrmodelInputs {
    fn default() -> Self {
        Self {
            preset: None,
            dv0: [0.0; 3],
            accel_bias: None,
            gyro_bias: None,
            gravity: None,
            dg_fractions: vec![0.05, 0.10],
            segments: SegmentLayout::default(),
            end_s: 15.0,
            step_s: 0.01,
        }
    }
}

fn preset(name: &str) -> Result<SensorSpec, Error> {
    SensorSpec::preset(name).ok_or_else(|| Error::Config(format!("unknown sensor preset {name:?}")))
}

pub fn errmodel(a: &ErrmodelArgs) -> Result<(), Error> {
    let mut inputs: ErrmodelInputs = match &a.inputs {
        Some(p) => read_structured(p)?,
        None => ErrmodelInputs::default(),
    };
    if a.preset.is_some() {
        inputs.preset = a.preset.clone();
    }
    let mut sensor = match &inputs.preset {
        Some(name) => preset(name)?,
        None => SensorSpec::ideal(),
    };
    if let Some(b) = inputs.accel_bias {
        sensor.accel_bias = Vector3::from(b);
    }
    if let Some(b) = inputs.gyro_bias {
        sensor.gyro_bias = Vector3::from(b);
    }
    if let Some(g) = inputs.gravity {
        sensor.gravity = g;
    }
    sensor.validate()?;
    if !(inputs.step_s > 0.0 && inputs.end_s >= 0.0) {
        return Err(Error::Config("time grid needs step_s > 0 and end_s >= 0".into()));
    }
    let seg = inputs.segments;
    if !(seg.duration_s > 0.0 && seg.length_m >= 0.0) {
        return Err(Error::Config("segments need duration_s > 0 and length_m >= 0".into()));
    }
    let error_inputs = ErrorInputs::from_sensor(&sensor, Vector3::from(inputs.dv0));
    // δs is linear in the gain, so a unit gain with Δf = length is exact
    let segments = PeriodicSegments::uniform(seg.count, seg.duration_s, seg.length_m, WeinbergGain::new(1.0, MorpiMode::A)?);
    let grid = time_grid(inputs.end_s, inputs.step_s);
    let budget = ErrorBudget::evaluate(&grid, &error_inputs, Some(&segments), &inputs.dg_fractions);
    match &a.out {
        Some(p) => budget.write_csv(fs::File::create(p)?),
        None => budget.write_csv(io::stdout().lock()),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Error> {
    let spec: TrajectorySpec = read_structured(&a.spec)?;
    spec.validate()?;
    let sensor = preset(&a.sensor)?;
    let truth = generate_truth(&spec)?;
    let ideal = imu_from_truth(&truth, sensor.gravity)?;
    let imu = corrupt(&ideal, &sensor, a.seed)?;
    fs::create_dir_all(&a.out)?;
    write_imu_log(&imu, fs::File::create(a.out.join("imu.csv"))?)?;
    truth.write_csv(fs::File::create(a.out.join("truth.csv"))?)?;
    let end = truth.endpoint_in_start_frame();
    let summary = serde_json::json!({
        "path_length": truth.path_length,
        "displacement": truth.displacement(),
        "truth_endpoint": [end.x, end.y],
        "samples": imu.len(),
        "seed": a.seed,
        "sensor": a.sensor,
        "spec": spec,
    });
    write_json(&a.out.join("summary.json"), &summary)?;
    println!(
        "{} samples, path {:.3} m, displacement {:.3} m -> {}",
        imu.len(),
        truth.path_length,
        truth.displacement(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    manifest_sha256: Option<String>,
    tables: Vec<TableReport<'a>>,
    gains: Vec<GainRecord>,
    /// Raw mean errors and pairwise ratios per trajectory; how published
    /// improvement percentages were derived is not known.
    comparisons: Vec<(String, Comparison)>,
}

#[derive(Serialize)]
struct GainRecord {
    device: String,
    period: Option<String>,
    mode: String,
    value: Option<f64>,
    training_runs: Option<usize>,
    error: Option<String>,
}

/// (trajectory, device, period) groups in manifest order.
fn groups(manifest: &RunManifest) -> Vec<(String, String, Option<String>)> {
    let mut out: Vec<(String, String, Option<String>)> = Vec::new();
    for e in &manifest.entries {
        let key = (e.trajectory.clone(), e.device.clone(), e.period.clone());
        if !out.contains(&key) {
            out.push(key);
        }
    }
    out
}

fn is_periodic(trajectory: &str) -> bool {
    trajectory != "straight"
}

pub fn evaluate(a: &EvaluateArgs, cfg: &MorpiConfig) -> Result<(), Error> {
    let manifest = load_manifest(&a.manifest)?;
    let mut tables: Vec<(String, ResultTable)> = Vec::new();
    let mut gains = Vec::new();
    let mut comparisons = Vec::new();

    for (trajectory, device, period) in groups(&manifest) {
        let scope = format!("{trajectory}/{device}{}", period.as_ref().map_or(String::new(), |p| format!("/{p}")));
        let all = EntryFilter { trajectory: Some(trajectory.clone()), device: Some(device.clone()), period: period.clone(), split: None };
        let mut means = Vec::new();

        for dim in [Dim::Spatial, Dim::Planar] {
            for calib in [CalibMode::Rd, CalibMode::Gac] {
                let t = ins_table(&manifest, &all, dim, calib, cfg);
                if let Some(s) = t.summary() {
                    means.push((format!("{dim}-INS-{calib}"), s.mean_error_m));
                }
                tables.push((format!("{scope} {dim}-INS {calib}"), t));
            }
        }

        if is_periodic(&trajectory) {
            // gains always come from the short-route training split of the same device and period
            let train = EntryFilter {
                trajectory: Some("periodic-short".into()),
                device: Some(device.clone()),
                period: period.clone(),
                split: Some(Split::Train),
            };
            let test = EntryFilter { split: (trajectory == "periodic-short").then_some(Split::Test), ..all.clone() };
            for mode in [MorpiMode::A, MorpiMode::G] {
                let gain = train_gain(&manifest, &train, mode, cfg);
                gains.push(GainRecord {
                    device: device.clone(),
                    period: period.clone(),
                    mode: mode.to_string(),
                    value: gain.as_ref().ok().map(|g| g.value),
                    training_runs: gain.as_ref().ok().map(|g| g.training_runs),
                    error: gain.as_ref().err().map(ToString::to_string),
                });
                let Ok(gain) = gain else {
                    warn!("{scope}: no gain for mode {mode}");
                    continue;
                };
                for calib in [CalibMode::Rd, CalibMode::Gc] {
                    let t = morpi_table(&manifest, &test, mode, calib, &gain, cfg);
                    if let Some(s) = t.summary() {
                        means.push((format!("MoRPI-{mode}-{calib}"), s.mean_error_m));
                    }
                    tables.push((format!("{scope} MoRPI-{mode} {calib}"), t));
                }
            }
        }
        comparisons.push((scope, Comparison::new(means)));
    }

    let reports: Vec<TableReport> = tables.iter().map(|(title, t)| TableReport::new(title.clone(), t)).collect();
    for r in &reports {
        r.print();
        println!();
    }
    let mut stdout = io::stdout().lock();
    for (scope, c) in &comparisons {
        writeln!(stdout, "{scope}: mean endpoint errors [m]")?;
        for (m, e) in &c.methods {
            writeln!(stdout, "  {m:<16} {e:.3}")?;
        }
    }
    writeln!(stdout, "note: pairwise ratios are reported raw; published improvement percentages use an unstated formula")?;

    if let Some(out) = &a.out {
        if !is_json(out) {
            warn!("{}: evaluate always writes JSON", out.display());
        }
        let report = EvaluateReport { manifest_sha256: manifest.hash.clone(), tables: reports, gains, comparisons };
        write_json(out, &report)?;
    }
    Ok(())
}
