// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Emulated measurement of a known two-qubit state: shadows and tomography.

use std::collections::BTreeMap;

use serde::Serialize;

use resbath_core::measurement::{AssignmentMatrix, RotationErrorModel};
use resbath_core::observables::{
    apply_dynamical_phase, fidelity_to_pure, ket_00, ket_11, state_fidelity, EigenbasisPhase,
};
use resbath_core::qlinalg::{DensityMatrix, MatrixJson, OperatorMatrix, SpaceLayout};
use resbath_core::shadows::{
    calibrate, estimate_observable, estimate_purity, generate_dataset, CalibrationResult, Estimate, EstimatorOptions,
    ShadowDataset,
};
use resbath_core::tomography::{measure_pauli_expectations, standard_error, TomographyResult};

use crate::config::{EstimationConfig, Method, ScenarioConfig, Target};
use crate::error::{CliError, CliResult};
use crate::run::target_ket;

/// SplitMix64 finaliser; decorrelates seeds derived from one base seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const CALIBRATION_TAG: u64 = 1;
pub const DATA_TAG: u64 = 2;
pub const QST_TAG: u64 = 3;

fn estimator_options(e: &EstimationConfig, seed: u64) -> EstimatorOptions {
    EstimatorOptions {
        k: e.k,
        n_boot: e.n_boot,
        seed,
    }
}

/// The measured state carries the configured dynamical phase.
pub fn measured_state(q: &DensityMatrix, e: &EstimationConfig) -> CliResult<DensityMatrix> {
    if e.dynamical_phase_rad == 0.0 {
        return Ok(q.clone());
    }
    Ok(apply_dynamical_phase(q, e.dynamical_phase_rad)?)
}

pub fn calibration_dataset(e: &EstimationConfig, seed: u64) -> CliResult<ShadowDataset> {
    let (rot, a) = e.readout()?;
    let ground = DensityMatrix::basis_state(&SpaceLayout::qubits(2), 0)?;
    Ok(generate_dataset(
        &ground,
        e.calibration_shots,
        1,
        calibration_runs(e),
        rot,
        &a,
        derive_seed(seed, CALIBRATION_TAG),
    )?)
}

fn calibration_runs(e: &EstimationConfig) -> usize {
    if e.calibration_shots.is_multiple_of(e.runs) {
        e.runs
    } else {
        1
    }
}

pub fn shadow_dataset(q: &DensityMatrix, e: &EstimationConfig, seed: u64) -> CliResult<ShadowDataset> {
    let (rot, a): (RotationErrorModel, AssignmentMatrix) = e.readout()?;
    let rho = measured_state(q, e)?;
    Ok(generate_dataset(
        &rho,
        e.shots,
        1,
        e.runs,
        rot,
        &a,
        derive_seed(seed, DATA_TAG),
    )?)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShadowEstimates {
    pub method: Method,
    pub fidelity: Estimate,
    pub p_gg: Estimate,
    pub p_plus: Estimate,
    pub p_minus: Estimate,
    pub p_ee: Estimate,
    pub purity: Estimate,
}

fn projector(ket: &[resbath_core::qlinalg::C64]) -> CliResult<OperatorMatrix> {
    Ok(OperatorMatrix::outer(&SpaceLayout::qubits(2), ket, ket)?)
}

/// Populations of `|00⟩, |ψ±(φ)⟩, |11⟩`, target fidelity and purity.
pub fn estimate_shadow_quantities(
    data: &ShadowDataset,
    calibration: Option<&CalibrationResult>,
    target: Target,
    e: &EstimationConfig,
    seed: u64,
) -> CliResult<ShadowEstimates> {
    let phase = EigenbasisPhase::new(e.dynamical_phase_rad);
    let opts = estimator_options(e, seed);
    let est =
        |ket: Vec<_>| -> CliResult<Estimate> { Ok(estimate_observable(data, &projector(&ket)?, calibration, &opts)?) };
    Ok(ShadowEstimates {
        method: if calibration.is_some() {
            Method::ShadowRobust
        } else {
            Method::ShadowStandard
        },
        fidelity: est(target_ket(target, phase))?,
        p_gg: est(ket_00())?,
        p_plus: est(phase.psi_plus())?,
        p_minus: est(phase.psi_minus())?,
        p_ee: est(ket_11())?,
        purity: estimate_purity(data, calibration, &opts)?,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct QstReport {
    #[serde(flatten)]
    pub result: TomographyResult,
    /// Target fidelity of the MLE state from the pooled expectations.
    pub fidelity: f64,
    /// Per-dataset MLE target fidelities.
    pub dataset_fidelities: Vec<f64>,
    /// Uhlmann fidelity of the pooled MLE state to the exact state.
    pub state_fidelity: f64,
    pub exact: MatrixJson,
}

/// Tomography over `runs` independent datasets; expectations are pooled for
/// the reported state and the stderr is the SEM of per-dataset fidelities.
pub fn qst(q: &DensityMatrix, target: Target, e: &EstimationConfig, seed: u64) -> CliResult<QstReport> {
    let (rot, a) = e.readout()?;
    let rho = measured_state(q, e)?;
    let phase = EigenbasisPhase::new(e.dynamical_phase_rad);
    let ket = target_ket(target, phase);
    let mut pooled: BTreeMap<String, f64> = BTreeMap::new();
    let mut fids = Vec::with_capacity(e.runs);
    for run in 0..e.runs {
        let s = derive_seed(seed, QST_TAG.wrapping_add((run as u64) << 8));
        let exp = measure_pauli_expectations(&rho, Some(e.qst_shots_per_setting), rot, &a, s)?;
        for (w, v) in &exp {
            *pooled.entry(w.clone()).or_insert(0.0) += v / e.runs as f64;
        }
        let (_, mle) = TomographyResult::from_expectations(exp)?;
        fids.push(fidelity_to_pure(&mle, &ket)?);
    }
    pooled.insert("II".into(), 1.0);
    let (mut result, mle) = TomographyResult::from_expectations(pooled)?;
    result.stderr = standard_error(&fids);
    Ok(QstReport {
        fidelity: fidelity_to_pure(&mle, &ket)?,
        state_fidelity: state_fidelity(&mle, &rho)?,
        dataset_fidelities: fids,
        exact: MatrixJson::from(rho.as_operator()),
        result,
    })
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum EstimationReport {
    Shadow(Box<ShadowEstimates>),
    Qst(Box<QstReport>),
}

/// Estimates `q` with the configured method; `None` for `exact`.
pub fn estimate(cfg: &ScenarioConfig, q: &DensityMatrix, seed: u64) -> CliResult<Option<EstimationReport>> {
    let e = &cfg.estimation;
    Ok(match e.method {
        Method::Exact => None,
        Method::Qst => Some(EstimationReport::Qst(Box::new(qst(q, cfg.target, e, seed)?))),
        Method::ShadowStandard | Method::ShadowRobust => {
            let data = shadow_dataset(q, e, seed)?;
            let cal = if e.method == Method::ShadowRobust {
                Some(calibrate(&calibration_dataset(e, seed)?)?)
            } else {
                None
            };
            Some(EstimationReport::Shadow(Box::new(estimate_shadow_quantities(
                &data,
                cal.as_ref(),
                cfg.target,
                e,
                seed,
            )?)))
        }
    })
}

impl EstimationReport {
    /// `(quantity, value, stderr)` rows for long-format CSV output.
    pub fn rows(&self) -> Vec<(&'static str, f64, f64)> {
        match self {
            EstimationReport::Shadow(s) => vec![
                ("fidelity", s.fidelity.value, s.fidelity.stderr),
                ("p_gg", s.p_gg.value, s.p_gg.stderr),
                ("p_plus", s.p_plus.value, s.p_plus.stderr),
                ("p_minus", s.p_minus.value, s.p_minus.stderr),
                ("p_ee", s.p_ee.value, s.p_ee.stderr),
                ("purity", s.purity.value, s.purity.stderr),
            ],
            EstimationReport::Qst(q) => vec![("fidelity", q.fidelity, q.result.stderr.unwrap_or(f64::NAN))],
        }
    }
}

pub fn require_two_qubits(data: &ShadowDataset) -> CliResult<()> {
    if data.n_qubits() != 2 {
        return Err(CliError::Config(format!(
            "shadow dataset has {} qubits; two are required",
            data.n_qubits()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(0, 1), derive_seed(0, 2));
        assert_ne!(derive_seed(0, 1), derive_seed(1, 1));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }
}
