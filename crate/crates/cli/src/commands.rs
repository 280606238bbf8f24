// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! One function per subcommand. Each writes its result files plus a manifest
//! under `out` and returns the paths written.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use resbath_core::qlinalg::MatrixJson;
use resbath_core::shadows::{calibrate, CalibrationResult, ShadowDataset};

use crate::config::{from_value, set_path, Loaded, ScenarioConfig, Toggle};
use crate::error::{CliError, CliResult};
use crate::estimate::{
    calibration_dataset, derive_seed, estimate, estimate_shadow_quantities, qst, require_two_qubits, shadow_dataset,
    EstimationReport,
};
use crate::output::{fingerprint, num, write_csv, write_json, write_manifest};
use crate::run::{build, observables, steady, trajectory, Observables};

fn file(out: &Path, cfg: &ScenarioConfig, suffix: &str) -> PathBuf {
    out.join(format!("{}_{suffix}", cfg.name))
}

#[derive(Serialize)]
struct SteadyFile<'a> {
    state: MatrixJson,
    observables: &'a Observables,
    diagnostics: &'a crate::run::SteadyDiagnostics,
}

/// Time series from every initial state, final states, optional steady
/// state and estimates.
pub fn simulate(loaded: &Loaded, out: &Path) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.cfg;
    let built = build(cfg)?;
    let runs: Vec<_> = cfg
        .schedule
        .initial
        .par_iter()
        .map(|init| trajectory(cfg, &built, init))
        .collect::<CliResult<_>>()?;
    let mut files = Vec::new();
    let mut header = vec!["initial".to_string(), "t_us".to_string()];
    header.extend(Observables::COLUMNS.iter().map(|s| s.to_string()));
    let mut rows = Vec::new();
    let mut diag = Vec::new();
    for (k, (init, tr)) in cfg.schedule.initial.iter().zip(&runs).enumerate() {
        let tag = init.tag(k);
        for (t, q) in tr.times_us.iter().zip(&tr.qubits) {
            let mut row = vec![tag.clone(), num(*t)];
            row.extend(observables(q, cfg.target)?.values().iter().map(|v| num(*v)));
            rows.push(row);
        }
        let path = file(out, cfg, &format!("final_{tag}.json"));
        write_json(&path, &MatrixJson::from(tr.qubits.last().expect("final").as_operator()))?;
        files.push(path);
        diag.push(json!({
            "initial": tag,
            "dt_s": tr.dt,
            "steps": tr.steps,
            "max_trace_drift": tr.max_trace_drift,
            "convergence_gate": tr.gate,
        }));
    }
    let ts = file(out, cfg, "timeseries.csv");
    write_csv(&ts, &header, &rows)?;
    files.insert(0, ts);

    let mut steady_diag = serde_json::Value::Null;
    if cfg.schedule.steady_state {
        let s = steady(cfg, &built)?;
        let obs = observables(&s.qubits, cfg.target)?;
        let path = file(out, cfg, "steady.json");
        write_json(
            &path,
            &SteadyFile {
                state: MatrixJson::from(s.qubits.as_operator()),
                observables: &obs,
                diagnostics: &s.diagnostics,
            },
        )?;
        steady_diag = serde_json::to_value(&s.diagnostics)?;
        files.push(path);
    }

    if cfg.estimation.method != crate::config::Method::Exact {
        let (est_rows, reports) = estimate_trajectories(cfg, &runs)?;
        let header: Vec<String> = ["initial", "t_us", "method", "quantity", "value", "stderr"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let path = file(out, cfg, "estimates.csv");
        write_csv(&path, &header, &est_rows)?;
        files.push(path);
        let path = file(out, cfg, "estimates.json");
        write_json(&path, &reports)?;
        files.push(path);
    }

    let manifest = write_manifest(
        out,
        "simulate",
        cfg,
        json!({ "trajectories": diag, "steady_state": steady_diag }),
        &files,
    )?;
    files.push(manifest);
    Ok(files)
}

#[derive(Serialize)]
struct TimedReport {
    initial: String,
    t_us: f64,
    report: EstimationReport,
}

type EstimateRows = (Vec<Vec<String>>, Vec<TimedReport>);

fn estimate_trajectories(cfg: &ScenarioConfig, runs: &[crate::run::Trajectory]) -> CliResult<EstimateRows> {
    let method = serde_json::to_value(cfg.estimation.method)?
        .as_str()
        .unwrap_or_default()
        .to_string();
    let mut jobs = Vec::new();
    for (k, tr) in runs.iter().enumerate() {
        let tag = cfg.schedule.initial[k].tag(k);
        let picks: Vec<usize> = if cfg.estimation.times_us.is_empty() {
            vec![tr.times_us.len() - 1]
        } else {
            cfg.estimation
                .times_us
                .iter()
                .map(|t| {
                    (0..tr.times_us.len())
                        .min_by(|&a, &b| (tr.times_us[a] - t).abs().total_cmp(&(tr.times_us[b] - t).abs()))
                        .expect("non-empty")
                })
                .collect()
        };
        for p in picks {
            jobs.push((tag.clone(), tr.times_us[p], &tr.qubits[p]));
        }
    }
    let reports: Vec<TimedReport> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, (tag, t, q))| {
            let report = estimate(cfg, q, derive_seed(cfg.seed, 1000 + j as u64))?
                .ok_or_else(|| CliError::Config("estimation method is exact".into()))?;
            Ok(TimedReport {
                initial: tag.clone(),
                t_us: *t,
                report,
            })
        })
        .collect::<CliResult<_>>()?;
    let rows = reports
        .iter()
        .flat_map(|r| {
            r.report.rows().into_iter().map(|(qty, v, e)| {
                vec![
                    r.initial.clone(),
                    num(r.t_us),
                    method.clone(),
                    qty.to_string(),
                    num(v),
                    num(e),
                ]
            })
        })
        .collect();
    Ok((rows, reports))
}

/// One sweep point as persisted in its completion marker.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointRecord {
    pub index: usize,
    pub fingerprint: String,
    pub axes: Vec<f64>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub error: Option<String>,
}

/// Sweep coordinates, first axis slowest.
pub fn sweep_points(cfg: &ScenarioConfig) -> CliResult<Vec<Vec<f64>>> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [sweep] section".into()))?;
    let grids: Vec<Vec<f64>> = sw.axes.iter().map(|a| a.grid()).collect::<CliResult<_>>()?;
    let mut points = vec![vec![]];
    for g in &grids {
        points = points
            .iter()
            .flat_map(|p| {
                g.iter().map(move |v| {
                    let mut q: Vec<f64> = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

/// Config of one sweep point.
pub fn point_config(loaded: &Loaded, coords: &[f64]) -> CliResult<ScenarioConfig> {
    let sw = loaded.cfg.sweep.as_ref().expect("checked by sweep_points");
    let mut v = loaded.value.clone();
    for (axis, x) in sw.axes.iter().zip(coords) {
        set_path(&mut v, &axis.path, *x)?;
    }
    from_value(v)
}

fn compute_point(loaded: &Loaded, coords: &[f64]) -> CliResult<Vec<f64>> {
    let cfg = point_config(loaded, coords)?;
    let built = build(&cfg)?;
    let s = steady(&cfg, &built)?;
    Ok(observables(&s.qubits, cfg.target)?.values().to_vec())
}

pub struct SweepOptions {
    /// `(i, n)`: compute only points with `index % n == i`.
    pub shard: Option<(usize, usize)>,
    /// Only assemble the CSV from existing markers.
    pub merge_only: bool,
}

/// Steady-state observables over a 1- or 2-axis grid, resumable through
/// per-point markers in `<out>/<name>_points/`.
pub fn sweep(loaded: &Loaded, out: &Path, opts: &SweepOptions) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.cfg;
    let points = sweep_points(cfg)?;
    let marker_dir = file(out, cfg, "points");
    std::fs::create_dir_all(&marker_dir)?;
    let mut base = cfg.clone();
    base.seed = 0;
    let base_print = serde_json::to_vec(&base)?;
    let marker = |i: usize| marker_dir.join(format!("{i:06}.json"));
    let print_of = |coords: &[f64]| {
        let mut bytes = base_print.clone();
        for c in coords {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        fingerprint(&bytes)
    };
    let read_marker = |i: usize, coords: &[f64]| -> Option<PointRecord> {
        let text = std::fs::read_to_string(marker(i)).ok()?;
        let rec: PointRecord = serde_json::from_str(&text).ok()?;
        (rec.fingerprint == print_of(coords)).then_some(rec)
    };
    if !opts.merge_only {
        let todo: Vec<usize> = (0..points.len())
            .filter(|i| opts.shard.is_none_or(|(k, n)| i % n == k))
            .filter(|&i| read_marker(i, &points[i]).is_none_or(|r| r.error.is_some()))
            .collect();
        log::info!("{}: {} of {} points to compute", cfg.name, todo.len(), points.len());
        todo.par_iter().try_for_each(|&i| -> CliResult<()> {
            let coords = &points[i];
            let rec = match compute_point(loaded, coords) {
                Ok(values) => PointRecord {
                    index: i,
                    fingerprint: print_of(coords),
                    axes: coords.clone(),
                    values: Some(values),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep point {i} failed: {e}");
                    PointRecord {
                        index: i,
                        fingerprint: print_of(coords),
                        axes: coords.clone(),
                        values: None,
                        error: Some(e.to_string()),
                    }
                }
            };
            write_json(&marker(i), &rec)
        })?;
    }
    let sw = cfg.sweep.as_ref().expect("checked");
    let mut header: Vec<String> = sw.axes.iter().map(|a| a.label()).collect();
    header.extend(Observables::COLUMNS.iter().map(|s| s.to_string()));
    header.push("status".into());
    let mut rows = Vec::new();
    let mut missing = 0;
    let mut failed = 0;
    for (i, coords) in points.iter().enumerate() {
        let Some(rec) = read_marker(i, coords) else {
            missing += 1;
            continue;
        };
        let mut row: Vec<String> = coords.iter().map(|c| num(*c)).collect();
        match (&rec.values, &rec.error) {
            (Some(v), _) => {
                row.extend(v.iter().map(|x| num(*x)));
                row.push("ok".into());
            }
            (None, err) => {
                failed += 1;
                row.extend(std::iter::repeat_n(String::new(), Observables::COLUMNS.len()));
                row.push(format!("error: {}", err.clone().unwrap_or_default()));
            }
        }
        rows.push(row);
    }
    let csv_path = file(out, cfg, "sweep.csv");
    write_csv(&csv_path, &header, &rows)?;
    let files = vec![csv_path];
    let manifest = write_manifest(
        out,
        "sweep",
        cfg,
        json!({ "points": points.len(), "missing": missing, "failed": failed }),
        &files,
    )?;
    Ok(vec![files[0].clone(), manifest])
}

/// `cfg` with one idealisation applied.
pub fn apply_toggle(cfg: &ScenarioConfig, toggle: Toggle) -> ScenarioConfig {
    let mut c = cfg.clone();
    match toggle {
        Toggle::ZeroResonatorThermal => {
            for r in &mut c.model.reservoirs {
                r.thermal_occupation = 0.0;
            }
            if let Some(s) = &mut c.model.shared_mode {
                s.thermal_occupation = 0.0;
            }
        }
        Toggle::ZeroIntrinsicDecay => {
            c.model.noise.gamma1_khz = 0.0;
            c.model.noise.gamma_plus_khz = 0.0;
            c.model.noise.gamma_minus_khz = 0.0;
        }
        Toggle::InfiniteSelectivity => {
            // κ/2J → 0 with every detuning kept at the same multiple of J.
            let f = SELECTIVITY_SCALE;
            c.model.hopping_mhz *= f;
            c.model.site_energies_mhz.iter_mut().for_each(|e| *e *= f);
            for r in &mut c.model.reservoirs {
                r.detuning_mhz *= f;
            }
            if let Some(s) = &mut c.model.shared_mode {
                s.pump_detuning_mhz *= f;
                s.loss_detuning_mhz *= f;
            }
        }
    }
    c
}

/// Factor applied to `J` and all detunings for `infinite_selectivity`.
pub const SELECTIVITY_SCALE: f64 = 100.0;

#[derive(Clone, Debug, Serialize)]
pub struct AblationEntry {
    pub toggle: Option<Toggle>,
    pub fidelity: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationReport {
    pub baseline: f64,
    pub entries: Vec<AblationEntry>,
}

pub fn ablation_report(cfg: &ScenarioConfig, toggles: &[Toggle]) -> CliResult<AblationReport> {
    let fid = |c: &ScenarioConfig| -> CliResult<f64> {
        let built = build(c)?;
        Ok(observables(&steady(c, &built)?.qubits, c.target)?.fidelity)
    };
    let baseline = fid(cfg)?;
    let mut entries = vec![AblationEntry {
        toggle: None,
        fidelity: baseline,
        delta: 0.0,
    }];
    let rest: Vec<AblationEntry> = toggles
        .par_iter()
        .map(|&t| {
            let f = fid(&apply_toggle(cfg, t))?;
            Ok(AblationEntry {
                toggle: Some(t),
                fidelity: f,
                delta: f - baseline,
            })
        })
        .collect::<CliResult<_>>()?;
    entries.extend(rest);
    Ok(AblationReport { baseline, entries })
}

/// Steady-state fidelity change per idealisation.
pub fn ablate(loaded: &Loaded, out: &Path, toggles: Option<&[Toggle]>) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.cfg;
    let toggles: Vec<Toggle> = match toggles {
        Some(t) => t.to_vec(),
        None => cfg.ablation.as_ref().map(|a| a.toggles.clone()).unwrap_or_default(),
    };
    let report = ablation_report(cfg, &toggles)?;
    let path = file(out, cfg, "ablation.json");
    write_json(&path, &report)?;
    let manifest = write_manifest(
        out,
        "ablate",
        cfg,
        json!({ "selectivity_scale": SELECTIVITY_SCALE }),
        std::slice::from_ref(&path),
    )?;
    Ok(vec![path, manifest])
}

fn sidecar(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn load_calibration(path: &Path) -> CliResult<CalibrationResult> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

#[derive(Serialize)]
struct ShadowReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<Observables>,
    calibration: CalibrationResult,
    standard: crate::estimate::ShadowEstimates,
    robust: crate::estimate::ShadowEstimates,
}

/// Generates (or reads) a shadow dataset of the steady state and reports
/// standard and robust estimates side by side.
pub fn shadows(
    loaded: &Loaded,
    out: &Path,
    input: Option<&Path>,
    calibration_file: Option<&Path>,
) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.cfg;
    let e = &cfg.estimation;
    let mut files = Vec::new();
    let calibration = match calibration_file {
        Some(p) => load_calibration(p)?,
        None => {
            let data = calibration_dataset(e, cfg.seed)?;
            let cal = calibrate(&data)?;
            let csv = file(out, cfg, "calibration_shots.csv");
            data.write(&csv, &sidecar(&csv))?;
            files.push(csv);
            cal
        }
    };
    let (mut data, truth) = match input {
        Some(p) => (ShadowDataset::read(p, &sidecar(p))?, None),
        None => {
            let built = build(cfg)?;
            let q = steady(cfg, &built)?.qubits;
            (shadow_dataset(&q, e, cfg.seed)?, Some(observables(&q, cfg.target)?))
        }
    };
    require_two_qubits(&data)?;
    if input.is_none() {
        data.meta.calibration = Some(calibration.clone());
        let csv = file(out, cfg, "shadows.csv");
        data.write(&csv, &sidecar(&csv))?;
        files.push(csv);
    }
    let seed = derive_seed(cfg.seed, 77);
    let standard = estimate_shadow_quantities(&data, None, cfg.target, e, seed)?;
    let robust = estimate_shadow_quantities(&data, Some(&calibration), cfg.target, e, seed)?;
    let path = file(out, cfg, "shadow_estimates.json");
    write_json(
        &path,
        &ShadowReport {
            truth,
            calibration,
            standard,
            robust,
        },
    )?;
    files.push(path);
    let manifest = write_manifest(
        out,
        "shadows",
        cfg,
        json!({ "input": input.map(|p| p.display().to_string()) }),
        &files,
    )?;
    files.push(manifest);
    Ok(files)
}

/// Learns the readout channel from all-ground shots.
pub fn calibrate_shadows(loaded: &Loaded, out: &Path, input: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.cfg;
    let mut files = Vec::new();
    let data = match input {
        Some(p) => ShadowDataset::read(p, &sidecar(p))?,
        None => {
            let d = calibration_dataset(&cfg.estimation, cfg.seed)?;
            let csv = file(out, cfg, "calibration_shots.csv");
            d.write(&csv, &sidecar(&csv))?;
            files.push(csv);
            d
        }
    };
    let cal = calibrate(&data)?;
    let path = file(out, cfg, "calibration.json");
    write_json(&path, &cal)?;
    files.push(path);
    let manifest = write_manifest(out, "calibrate-shadows", cfg, json!({ "shots": data.len() }), &files)?;
    files.push(manifest);
    Ok(files)
}

#[derive(Serialize)]
struct TomographyFile {
    truth: Observables,
    #[serde(flatten)]
    report: crate::estimate::QstReport,
}

/// Pauli tomography of the steady state.
pub fn tomography(loaded: &Loaded, out: &Path) -> CliResult<Vec<PathBuf>> {
    let cfg = &loaded.cfg;
    let built = build(cfg)?;
    let q = steady(cfg, &built)?.qubits;
    let report = qst(&q, cfg.target, &cfg.estimation, cfg.seed)?;
    let path = file(out, cfg, "tomography.json");
    write_json(
        &path,
        &TomographyFile {
            truth: observables(&q, cfg.target)?,
            report,
        },
    )?;
    let manifest = write_manifest(out, "tomography", cfg, json!({}), std::slice::from_ref(&path))?;
    Ok(vec![path, manifest])
}
