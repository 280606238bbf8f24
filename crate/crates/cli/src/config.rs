// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! TOML scenario configs.
//!
//! Frequencies are written in MHz and converted to angular rad/s, intrinsic
//! rates in kHz (also angular), times in µs. A file names a preset (default
//! `device`) and overrides any subset of its fields; tables merge recursively
//! and arrays replace wholesale.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Value;

use resbath_core::measurement::{AssignmentMatrix, RotationErrorModel};
use resbath_core::qlinalg::MatrixJson;
use resbath_core::reservoir_model::{DeviceNoise, LatticeSpec, ReservoirKind, ReservoirSpec, SharedModeSpec};

use crate::error::{CliError, CliResult};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
pub const MHZ: f64 = TWO_PI * 1e6;
pub const KHZ: f64 = TWO_PI * 1e3;
pub const US: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub preset: String,
    pub seed: u64,
    pub target: Target,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub estimation: EstimationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Minus,
    Plus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub hopping_mhz: f64,
    #[serde(default)]
    pub site_energies_mhz: Vec<f64>,
    pub cutoff: usize,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub reservoirs: Vec<ReservoirConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_mode: Option<SharedModeConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub gamma1_khz: f64,
    pub gamma_plus_khz: f64,
    pub gamma_minus_khz: f64,
    pub qubit_thermal: f64,
    #[serde(default)]
    pub dephasing_khz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    pub kind: ReservoirKind,
    pub site: String,
    pub coupling_mhz: f64,
    pub detuning_mhz: f64,
    pub linewidth_mhz: f64,
    pub thermal_occupation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharedModeConfig {
    pub site: String,
    pub pump_coupling_mhz: f64,
    pub loss_coupling_mhz: f64,
    pub pump_detuning_mhz: f64,
    pub loss_detuning_mhz: f64,
    pub linewidth_mhz: f64,
    pub thermal_occupation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    /// `gg`, `ge`, `eg` or `ee`, resonators in vacuum.
    Label(String),
    /// Qubit density matrix, resonators in vacuum.
    Matrix { real: Vec<Vec<f64>>, imag: Vec<Vec<f64>> },
}

impl InitialState {
    pub fn tag(&self, index: usize) -> String {
        match self {
            InitialState::Label(s) => s.clone(),
            InitialState::Matrix { .. } => format!("custom{index}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub initial: Vec<InitialState>,
    pub duration_us: f64,
    pub record_every_us: f64,
    pub dt_max_ns: f64,
    /// Also solve for the steady state and report it.
    pub steady_state: bool,
    /// Re-run with half the step and report the trace distance.
    pub convergence_gate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Qst,
    ShadowStandard,
    ShadowRobust,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePreset {
    None,
    Illustrative,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub method: Method,
    /// Shadow shots, split into `runs` equal runs.
    pub shots: usize,
    pub runs: usize,
    pub k: usize,
    pub n_boot: usize,
    pub calibration_shots: usize,
    pub qst_shots_per_setting: usize,
    pub noise: NoisePreset,
    /// Used with `noise = "custom"`.
    #[serde(default)]
    pub flip_probability: f64,
    #[serde(default)]
    pub over_rotation: f64,
    #[serde(default)]
    pub depolarizing: f64,
    /// Phase imprinted on `Q1|e⟩` before readout, compensated in the targets.
    #[serde(default)]
    pub dynamical_phase_rad: f64,
    /// Times at which recorded states are estimated; empty means final only.
    #[serde(default)]
    pub times_us: Vec<f64>,
}

impl EstimationConfig {
    pub fn readout(&self) -> CliResult<(RotationErrorModel, AssignmentMatrix)> {
        let out = match self.noise {
            NoisePreset::None => (RotationErrorModel::default(), AssignmentMatrix::ideal(2)),
            NoisePreset::Illustrative => (RotationErrorModel::illustrative(), AssignmentMatrix::illustrative(2)),
            NoisePreset::Custom => (
                RotationErrorModel {
                    over_rotation: self.over_rotation,
                    depolarizing: self.depolarizing,
                },
                AssignmentMatrix::symmetric(2, self.flip_probability)?,
            ),
        };
        out.0.validate()?;
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    /// Dotted path into the config, e.g. `model.reservoirs.0.detuning_mhz`.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl AxisConfig {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.path.clone())
    }

    pub fn grid(&self) -> CliResult<Vec<f64>> {
        let grid = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) if n >= 2 => {
                (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
            }
            _ => {
                return Err(CliError::Config(format!(
                    "axis `{}` needs either `values` or `start`, `stop`, `points >= 2`",
                    self.path
                )))
            }
        };
        if grid.len() < 2 {
            return Err(CliError::Config(format!(
                "axis `{}` has fewer than 2 points",
                self.path
            )));
        }
        Ok(grid)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<AxisConfig>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_max_points() -> usize {
    10_000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Toggle {
    ZeroResonatorThermal,
    ZeroIntrinsicDecay,
    InfiniteSelectivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub toggles: Vec<Toggle>,
}

/// Names accepted by `preset`.
pub const PRESETS: [&str; 2] = ["device", "device_g073"];

/// Device and reservoir parameters of the two-qubit prototype: pump on `Q1`
/// resonant with `|−⟩` at `δ_S = −J`, loss on `Q2` at `δ_D = +J`.
pub fn preset(name: &str) -> CliResult<ScenarioConfig> {
    let (g_pump, g_loss) = match name {
        "device" => (0.75, 0.58),
        "device_g073" => (0.73, 0.73),
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}` (expected one of {PRESETS:?})"
            )))
        }
    };
    let j = 6.0;
    let reservoir = |kind, site: &str, g: f64, delta: f64| ReservoirConfig {
        kind,
        site: site.into(),
        coupling_mhz: g,
        detuning_mhz: delta,
        linewidth_mhz: 1.5,
        thermal_occupation: 0.025,
    };
    Ok(ScenarioConfig {
        name: name.to_string(),
        preset: name.to_string(),
        seed: 0,
        target: Target::Minus,
        model: ModelConfig {
            n_sites: 2,
            hopping_mhz: j,
            site_energies_mhz: vec![],
            cutoff: 3,
            noise: NoiseConfig {
                gamma1_khz: 4.0,
                gamma_plus_khz: 8.4,
                gamma_minus_khz: 3.2,
                qubit_thermal: 0.05,
                dephasing_khz: 0.0,
            },
            reservoirs: vec![
                reservoir(ReservoirKind::Pump, "Q1", g_pump, -j),
                reservoir(ReservoirKind::Loss, "Q2", g_loss, j),
            ],
            shared_mode: None,
        },
        schedule: ScheduleConfig {
            initial: vec![InitialState::Label("gg".into())],
            duration_us: 10.0,
            record_every_us: 0.05,
            dt_max_ns: 0.5,
            steady_state: true,
            convergence_gate: false,
        },
        estimation: EstimationConfig {
            method: Method::Exact,
            shots: 90_000,
            runs: 9,
            k: 100,
            n_boot: 400,
            calibration_shots: 90_000,
            qst_shots_per_setting: 10_000,
            noise: NoisePreset::None,
            flip_probability: 0.0,
            over_rotation: 0.0,
            depolarizing: 0.0,
            dynamical_phase_rad: 0.0,
            times_us: vec![],
        },
        sweep: None,
        ablation: None,
    })
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Preset merged with the user table, before typed deserialisation.
pub fn resolve_value(user: Value) -> CliResult<Value> {
    let name = user
        .get("preset")
        .and_then(Value::as_str)
        .unwrap_or("device")
        .to_string();
    let mut base = Value::try_from(preset(&name)?).map_err(|e| CliError::Config(e.to_string()))?;
    merge(&mut base, user);
    Ok(base)
}

pub fn from_value(value: Value) -> CliResult<ScenarioConfig> {
    let cfg: ScenarioConfig = value.try_into()?;
    cfg.validate()?;
    Ok(cfg)
}

/// A validated config together with its merged TOML form, which sweeps edit.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub cfg: ScenarioConfig,
    pub value: Value,
}

impl Loaded {
    pub fn parse(text: &str) -> CliResult<Self> {
        let value = resolve_value(toml::from_str(text)?)?;
        Ok(Self {
            cfg: from_value(value.clone())?,
            value,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.cfg.seed = seed;
        if let Value::Table(t) = &mut self.value {
            t.insert("seed".into(), Value::Integer(seed as i64));
        }
        self
    }
}

pub fn parse_str(text: &str) -> CliResult<ScenarioConfig> {
    Ok(Loaded::parse(text)?.cfg)
}

pub fn load(path: &Path) -> CliResult<ScenarioConfig> {
    Ok(Loaded::load(path)?.cfg)
}

/// Writes `value` at a dotted path; numeric segments index arrays.
pub fn set_path(root: &mut Value, path: &str, value: f64) -> CliResult<()> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        node = match node {
            Value::Table(t) => {
                if last {
                    let slot = t
                        .get_mut(*part)
                        .ok_or_else(|| CliError::Config(format!("sweep path `{path}`: no field `{part}`")))?;
                    *slot = match slot {
                        Value::Integer(_) if value.fract() == 0.0 => Value::Integer(value as i64),
                        _ => Value::Float(value),
                    };
                    return Ok(());
                }
                t.get_mut(*part)
                    .ok_or_else(|| CliError::Config(format!("sweep path `{path}`: no field `{part}`")))?
            }
            Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| CliError::Config(format!("sweep path `{path}`: `{part}` is not an index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| CliError::Config(format!("sweep path `{path}`: index {idx} >= {len}")))?;
                if last {
                    *slot = Value::Float(value);
                    return Ok(());
                }
                slot
            }
            _ => return Err(CliError::Config(format!("sweep path `{path}` passes through a scalar"))),
        };
    }
    Err(CliError::Config(format!("empty sweep path `{path}`")))
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::Config(format!("{name} must be > 0, got {v}")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> CliResult<()> {
        let m = &self.model;
        match (m.reservoirs.is_empty(), &m.shared_mode) {
            (false, Some(_)) => {
                return Err(CliError::Config(
                    "set either `model.reservoirs` or `model.shared_mode`, not both \
                     (use `reservoirs = []` with a shared mode)"
                        .into(),
                ))
            }
            (true, None) => {
                return Err(CliError::Config(
                    "one of `model.reservoirs` or `model.shared_mode` is required".into(),
                ))
            }
            _ => {}
        }
        if m.n_sites != 2 {
            return Err(CliError::Config(format!(
                "scenarios report two-qubit observables; n_sites = {} is not supported",
                m.n_sites
            )));
        }
        if m.cutoff < 2 {
            return Err(CliError::Config(format!("cutoff must be >= 2, got {}", m.cutoff)));
        }
        let s = &self.schedule;
        positive("schedule.duration_us", s.duration_us)?;
        positive("schedule.record_every_us", s.record_every_us)?;
        positive("schedule.dt_max_ns", s.dt_max_ns)?;
        if s.initial.is_empty() {
            return Err(CliError::Config("schedule.initial is empty".into()));
        }
        for init in &s.initial {
            if let InitialState::Label(l) = init {
                if !["gg", "ge", "eg", "ee"].contains(&l.as_str()) {
                    return Err(CliError::Config(format!("unknown initial state `{l}`")));
                }
            }
        }
        let e = &self.estimation;
        if e.runs == 0 || !e.shots.is_multiple_of(e.runs) {
            return Err(CliError::Config(format!(
                "estimation.shots = {} must split into runs = {}",
                e.shots, e.runs
            )));
        }
        if e.k == 0 || e.k > e.shots / e.runs {
            return Err(CliError::Config(format!("estimation.k = {} is out of range", e.k)));
        }
        if e.n_boot < 2 {
            return Err(CliError::Config("estimation.n_boot must be >= 2".into()));
        }
        if e.qst_shots_per_setting == 0 || e.calibration_shots == 0 {
            return Err(CliError::Config("shot counts must be >= 1".into()));
        }
        e.readout()?;
        if let Some(sw) = &self.sweep {
            if sw.axes.is_empty() || sw.axes.len() > 2 {
                return Err(CliError::Config("a sweep needs 1 or 2 axes".into()));
            }
            let total: usize = sw
                .axes
                .iter()
                .map(|a| a.grid().map(|g| g.len()))
                .product::<CliResult<usize>>()?;
            if total > sw.max_points {
                return Err(CliError::Config(format!(
                    "sweep has {total} points, above max_points = {}",
                    sw.max_points
                )));
            }
        }
        self.lattice().validate()?;
        self.noise().validate()?;
        for r in self.reservoirs() {
            r.validate()?;
        }
        if let Some(sh) = self.shared_mode() {
            sh.validate()?;
        }
        Ok(())
    }

    pub fn lattice(&self) -> LatticeSpec {
        let mut l = LatticeSpec::uniform(self.model.n_sites, self.model.hopping_mhz * MHZ);
        if !self.model.site_energies_mhz.is_empty() {
            l.site_energies = self.model.site_energies_mhz.iter().map(|e| e * MHZ).collect();
        }
        l
    }

    pub fn noise(&self) -> DeviceNoise {
        let n = &self.model.noise;
        DeviceNoise {
            gamma1: n.gamma1_khz * KHZ,
            gamma_plus: n.gamma_plus_khz * KHZ,
            gamma_minus: n.gamma_minus_khz * KHZ,
            qubit_thermal: n.qubit_thermal,
            dephasing: n.dephasing_khz * KHZ,
        }
    }

    pub fn reservoirs(&self) -> Vec<ReservoirSpec> {
        self.model
            .reservoirs
            .iter()
            .map(|r| ReservoirSpec {
                kind: r.kind,
                site: r.site.clone(),
                coupling: r.coupling_mhz * MHZ,
                detuning: r.detuning_mhz * MHZ,
                linewidth: r.linewidth_mhz * MHZ,
                thermal_occupation: r.thermal_occupation,
            })
            .collect()
    }

    pub fn shared_mode(&self) -> Option<SharedModeSpec> {
        self.model.shared_mode.as_ref().map(|s| SharedModeSpec {
            site: s.site.clone(),
            pump_coupling: s.pump_coupling_mhz * MHZ,
            loss_coupling: s.loss_coupling_mhz * MHZ,
            pump_detuning: s.pump_detuning_mhz * MHZ,
            loss_detuning: s.loss_detuning_mhz * MHZ,
            linewidth: s.linewidth_mhz * MHZ,
            thermal_occupation: s.thermal_occupation,
        })
    }
}

impl From<&MatrixJson> for InitialState {
    fn from(m: &MatrixJson) -> Self {
        InitialState::Matrix {
            real: m.real.clone(),
            imag: m.imag.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_preset() {
        let cfg = parse_str("").unwrap();
        assert_eq!(cfg, preset("device").unwrap());
    }

    #[test]
    fn overrides_merge_into_preset() {
        let cfg = parse_str("preset = \"device_g073\"\n[model]\ncutoff = 2\n").unwrap();
        assert_eq!(cfg.model.cutoff, 2);
        assert_eq!(cfg.model.reservoirs[1].coupling_mhz, 0.73);
        assert_eq!(cfg.model.noise.gamma_plus_khz, 8.4);
    }

    #[test]
    fn rejects_both_reservoir_kinds() {
        let text = "[model.shared_mode]\nsite = \"Q1\"\npump_coupling_mhz = 0.75\nloss_coupling_mhz = 0.58\n\
                    pump_detuning_mhz = -6.0\nloss_detuning_mhz = 6.0\nlinewidth_mhz = 1.5\nthermal_occupation = 0.025\n";
        assert!(matches!(parse_str(text), Err(CliError::Config(_))));
        let ok = format!("[model]\nreservoirs = []\n{text}");
        assert!(parse_str(&ok).unwrap().shared_mode().is_some());
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        assert!(parse_str("[model]\nhoping_mhz = 6.0\n").is_err());
        assert!(parse_str("[schedule]\nduration_us = 0.0\n").is_err());
        assert!(parse_str("preset = \"nope\"\n").is_err());
    }

    #[test]
    fn set_path_reaches_array_items() {
        let mut v = resolve_value(toml::from_str("").unwrap()).unwrap();
        set_path(&mut v, "model.reservoirs.0.detuning_mhz", -3.0).unwrap();
        set_path(&mut v, "model.cutoff", 2.0).unwrap();
        let cfg = from_value(v.clone()).unwrap();
        assert_eq!(cfg.model.reservoirs[0].detuning_mhz, -3.0);
        assert_eq!(cfg.model.cutoff, 2);
        assert!(set_path(&mut v, "model.reservoirs.5.detuning_mhz", 1.0).is_err());
    }

    #[test]
    fn axis_grid_forms() {
        let a = AxisConfig {
            path: "x".into(),
            label: None,
            values: None,
            start: Some(-1.0),
            stop: Some(1.0),
            points: Some(5),
        };
        assert_eq!(a.grid().unwrap(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
