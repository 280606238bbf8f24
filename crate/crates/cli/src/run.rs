// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Model construction and the exact (noise-free) quantities a scenario reports.

use serde::Serialize;

use resbath_core::lindblad::{
    dt_convergence_gate, evolve, steady_state_co_rotating, steady_state_report, ConvergenceGate, EvolveOptions,
    LiouvillianModel,
};
use resbath_core::observables::{eigenstate_populations, pauli_expectation, purity, EigenbasisPhase};
use resbath_core::qlinalg::{DensityMatrix, OperatorMatrix, SpaceLayout, C64};
use resbath_core::reservoir_model::{
    build_model, build_shared_mode_frame, build_shared_mode_model, STATIC_MICROMOTION,
};

use crate::config::{InitialState, ScenarioConfig, Target, US};
use crate::error::{CliError, CliResult, Context};

pub const QUBITS: [&str; 2] = ["Q1", "Q2"];

/// Lab-frame model, plus the co-rotating static form for a driven shared mode.
pub struct BuiltModel {
    pub model: LiouvillianModel,
    pub frame: Option<(LiouvillianModel, Vec<f64>)>,
}

pub fn build(cfg: &ScenarioConfig) -> CliResult<BuiltModel> {
    let lattice = cfg.lattice();
    let noise = cfg.noise();
    let cutoff = cfg.model.cutoff;
    match cfg.shared_mode() {
        None => Ok(BuiltModel {
            model: build_model(&lattice, &cfg.reservoirs(), &noise, cutoff).context("building model")?,
            frame: None,
        }),
        Some(shared) => {
            let model = build_shared_mode_model(&lattice, &shared, &noise, cutoff).context("building model")?;
            let frame = if shared.micromotion_frequency().abs() < STATIC_MICROMOTION {
                None
            } else {
                Some(build_shared_mode_frame(&lattice, &shared, &noise, cutoff).context("building frame")?)
            };
            Ok(BuiltModel { model, frame })
        }
    }
}

fn qubit_matrix(init: &InitialState) -> CliResult<OperatorMatrix> {
    let layout = SpaceLayout::qubits(2);
    match init {
        InitialState::Label(l) => {
            let k = ["gg", "ge", "eg", "ee"]
                .iter()
                .position(|s| s == l)
                .ok_or_else(|| CliError::Config(format!("unknown initial state `{l}`")))?;
            Ok(DensityMatrix::basis_state(&layout, k)?.into_operator())
        }
        InitialState::Matrix { real, imag } => {
            if real.len() != 4 || imag.len() != 4 || real.iter().chain(imag).any(|r| r.len() != 4) {
                return Err(CliError::Config("explicit initial state must be 4x4".into()));
            }
            let op = OperatorMatrix::from_fn(&layout, |i, j| C64::new(real[i][j], imag[i][j]));
            Ok(DensityMatrix::new(op)
                .map_err(|e| CliError::Config(format!("explicit initial state: {e}")))?
                .into_operator())
        }
    }
}

/// Qubit state tensored with the resonator vacuum.
pub fn initial_state(init: &InitialState, layout: &SpaceLayout) -> CliResult<DensityMatrix> {
    let q = qubit_matrix(init)?;
    let labels = layout.labels();
    let qpos: Vec<usize> = QUBITS
        .iter()
        .map(|l| labels.iter().position(|x| x == l))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Config("model lacks Q1/Q2".into()))?;
    let split = |k: usize| -> Option<usize> {
        let digits = layout.digits(k);
        let vacuum = digits.iter().enumerate().all(|(s, &v)| qpos.contains(&s) || v == 0);
        vacuum.then(|| digits[qpos[0]] * 2 + digits[qpos[1]])
    };
    let op = OperatorMatrix::from_fn(layout, |i, j| match (split(i), split(j)) {
        (Some(a), Some(b)) => q.get(a, b),
        _ => C64::new(0.0, 0.0),
    });
    Ok(DensityMatrix::new(op)?)
}

pub fn reduce(full: &DensityMatrix) -> CliResult<DensityMatrix> {
    Ok(full.partial_trace(&QUBITS)?)
}

/// Exact two-qubit quantities reported for every state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observables {
    pub fidelity: f64,
    pub p_gg: f64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_ee: f64,
    pub purity: f64,
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
}

impl Observables {
    pub const COLUMNS: [&'static str; 9] = [
        "fidelity", "p_gg", "p_plus", "p_minus", "p_ee", "purity", "xx", "yy", "zz",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.fidelity,
            self.p_gg,
            self.p_plus,
            self.p_minus,
            self.p_ee,
            self.purity,
            self.xx,
            self.yy,
            self.zz,
        ]
    }
}

pub fn target_ket(target: Target, phase: EigenbasisPhase) -> Vec<C64> {
    match target {
        Target::Minus => phase.psi_minus(),
        Target::Plus => phase.psi_plus(),
    }
}

pub fn observables(q: &DensityMatrix, target: Target) -> CliResult<Observables> {
    let pops = eigenstate_populations(q, EigenbasisPhase::new(0.0))?;
    Ok(Observables {
        fidelity: match target {
            Target::Minus => pops.minus,
            Target::Plus => pops.plus,
        },
        p_gg: pops.gg,
        p_plus: pops.plus,
        p_minus: pops.minus,
        p_ee: pops.ee,
        purity: purity(q),
        xx: pauli_expectation(q, "XX")?,
        yy: pauli_expectation(q, "YY")?,
        zz: pauli_expectation(q, "ZZ")?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadyDiagnostics {
    pub solver: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_singular: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_singular: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_dim: Option<usize>,
}

pub struct SteadyOutcome {
    pub qubits: DensityMatrix,
    pub diagnostics: SteadyDiagnostics,
}

/// Steady state, or its period average for a driven shared mode.
pub fn steady(cfg: &ScenarioConfig, built: &BuiltModel) -> CliResult<SteadyOutcome> {
    match &built.frame {
        None => {
            let r = steady_state_report(&built.model).context("steady state")?;
            Ok(SteadyOutcome {
                qubits: reduce(&r.state)?,
                diagnostics: SteadyDiagnostics {
                    solver: "null_space".into(),
                    relative_residual: Some(r.relative_residual),
                    second_singular: Some(r.second_singular),
                    largest_singular: Some(r.largest_singular),
                    block_dim: Some(r.block_dim),
                },
            })
        }
        Some((frame, charges)) => {
            let rho = steady_state_co_rotating(frame, charges).context("co-rotating steady state")?;
            log::debug!("{}: co-rotating frame steady state", cfg.name);
            Ok(SteadyOutcome {
                qubits: reduce(&rho)?,
                diagnostics: SteadyDiagnostics {
                    solver: "co_rotating_period_average".into(),
                    relative_residual: None,
                    second_singular: None,
                    largest_singular: None,
                    block_dim: None,
                },
            })
        }
    }
}

pub struct Trajectory {
    pub times_us: Vec<f64>,
    pub qubits: Vec<DensityMatrix>,
    pub dt: f64,
    pub steps: u64,
    pub max_trace_drift: f64,
    pub gate: Option<ConvergenceGate>,
}

/// Step options whose step divides the record interval exactly.
pub fn evolve_options(cfg: &ScenarioConfig, model: &LiouvillianModel) -> CliResult<EvolveOptions> {
    let base = EvolveOptions {
        dt_max: cfg.schedule.dt_max_ns * 1e-9,
        ..EvolveOptions::default()
    };
    let bound = base.step_for(model)?;
    let every = cfg.schedule.record_every_us * US;
    let per_record = (every / bound * (1.0 - 1e-12)).ceil().max(1.0);
    Ok(EvolveOptions {
        dt_max: every / per_record,
        record_stride: per_record as usize,
        ..base
    })
}

pub fn trajectory(cfg: &ScenarioConfig, built: &BuiltModel, init: &InitialState) -> CliResult<Trajectory> {
    let rho0 = initial_state(init, built.model.layout())?;
    let opts = evolve_options(cfg, &built.model)?;
    let t_final = cfg.schedule.duration_us * US;
    let res = evolve(&built.model, &rho0, t_final, &opts).context("time evolution")?;
    let gate = if cfg.schedule.convergence_gate {
        Some(dt_convergence_gate(&built.model, &rho0, t_final, &opts, &res).context("dt convergence gate")?)
    } else {
        None
    };
    Ok(Trajectory {
        times_us: res.times.iter().map(|t| t / US).collect(),
        qubits: res.states.iter().map(reduce).collect::<CliResult<_>>()?,
        dt: res.dt,
        steps: res.steps,
        max_trace_drift: res.max_trace_drift,
        gate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_str;

    #[test]
    fn initial_labels_map_to_qubit_basis() {
        let cfg = parse_str("[model]\ncutoff = 2\n").unwrap();
        let built = build(&cfg).unwrap();
        let rho = initial_state(&InitialState::Label("eg".into()), built.model.layout()).unwrap();
        let q = reduce(&rho).unwrap();
        assert_eq!(q.get(2, 2).re, 1.0);
        let obs = observables(&q, Target::Minus).unwrap();
        assert!((obs.p_plus - 0.5).abs() < 1e-15 && (obs.p_minus - 0.5).abs() < 1e-15);
        assert_eq!(obs.zz, -1.0);
    }

    #[test]
    fn records_land_on_the_requested_grid() {
        let cfg = parse_str("[model]\ncutoff = 2\n[schedule]\nduration_us = 0.2\nrecord_every_us = 0.05\n").unwrap();
        let built = build(&cfg).unwrap();
        let tr = trajectory(&cfg, &built, &InitialState::Label("gg".into())).unwrap();
        assert_eq!(tr.times_us.len(), 5);
        for (k, t) in tr.times_us.iter().enumerate() {
            assert!((t - 0.05 * k as f64).abs() < 1e-9);
        }
    }
}
