// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Direct two-qubit Pauli tomography with readout mitigation, followed by a
//! projection onto the physical states.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{
    born_probabilities, mitigate_assignment, outcome_counts, AssignmentMatrix, CliffordSetting, Gate,
    RotationErrorModel, ShotSampler,
};
use crate::observables::{density_matrix_from_paulis, pauli_operator, pauli_words};
use crate::qlinalg::{eig_hermitian, DensityMatrix, MatrixJson, OperatorMatrix, C64};

pub const MLE_METHOD: &str = "eigenvalue-truncation";

/// Gate that maps `letter` onto the Z readout, and the sign of the result.
fn basis_gate(letter: char) -> Result<(Gate, f64)> {
    let target = pauli_operator(&letter.to_string())?;
    let z = pauli_operator("Z")?;
    for g in Gate::ALL {
        let u = g.unitary(0.0);
        let measured = u.adjoint().matmul(&z)?.matmul(&u)?;
        let overlap = measured.matmul(&target)?.trace().re / 2.0;
        if (overlap.abs() - 1.0).abs() < 1e-12 {
            return Ok((g, overlap.signum()));
        }
    }
    Err(Error::InvalidPauli(letter.to_string()))
}

/// The nine settings `{X, Y, Z}²` in word order.
pub fn basis_settings() -> Vec<String> {
    pauli_words(2).into_iter().filter(|w| !w.contains('I')).collect()
}

fn setting_for(basis: &str) -> Result<(CliffordSetting, Vec<f64>)> {
    let mut gates = Vec::new();
    let mut signs = Vec::new();
    for c in basis.chars() {
        let (g, s) = basis_gate(c)?;
        gates.push(g);
        signs.push(s);
    }
    Ok((CliffordSetting(gates), signs))
}

/// Word expectations from per-basis outcome distributions. Each word is the
/// average over all bases that measure it.
fn expectations_from_distributions(dists: &BTreeMap<String, Vec<f64>>) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for word in pauli_words(2) {
        if word == "II" {
            out.insert(word, 1.0);
            continue;
        }
        let letters: Vec<char> = word.chars().collect();
        let mut acc = 0.0;
        let mut count = 0.0;
        for (basis, dist) in dists {
            let b: Vec<char> = basis.chars().collect();
            if (0..2).any(|q| letters[q] != 'I' && letters[q] != b[q]) {
                continue;
            }
            let (_, signs) = setting_for(basis)?;
            let mut e = 0.0;
            for (outcome, &p) in dist.iter().enumerate() {
                let mut v = 1.0;
                for q in 0..2 {
                    if letters[q] != 'I' {
                        let bit = (outcome >> (1 - q)) & 1;
                        v *= signs[q] * if bit == 0 { 1.0 } else { -1.0 };
                    }
                }
                e += v * p;
            }
            acc += e;
            count += 1.0;
        }
        out.insert(word, acc / count);
    }
    Ok(out)
}

/// Exact readout distribution including pulse depolarisation and assignment
/// errors; the infinite-statistics limit of the sampler.
fn exact_distribution(
    rho: &DensityMatrix,
    setting: &CliffordSetting,
    noise: RotationErrorModel,
    assignment: &AssignmentMatrix,
) -> Result<Vec<f64>> {
    let u: Vec<OperatorMatrix> = setting.0.iter().map(|g| g.unitary(noise.over_rotation)).collect();
    let p = born_probabilities(rho, &u)?;
    let depol = AssignmentMatrix::new(
        setting
            .0
            .iter()
            .map(|g| {
                let d = if g.is_pulse() { noise.depolarizing / 2.0 } else { 0.0 };
                [[1.0 - d, d], [d, 1.0 - d]]
            })
            .collect(),
    )?;
    assignment.corrupt(&depol.corrupt(&p)?)
}

/// All 16 two-qubit Pauli expectations from the nine basis settings, with
/// readout mitigation through `A⁻¹`. `shots_per_setting = None` substitutes
/// exact outcome probabilities for samples.
pub fn measure_pauli_expectations(
    rho: &DensityMatrix,
    shots_per_setting: Option<usize>,
    noise: RotationErrorModel,
    assignment: &AssignmentMatrix,
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    if rho.layout().dims() != [2, 2] || assignment.n_qubits() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: rho.dim(),
        });
    }
    let bases = basis_settings();
    let settings: Vec<CliffordSetting> = bases
        .iter()
        .map(|b| setting_for(b).map(|s| s.0))
        .collect::<Result<_>>()?;
    let mut dists = BTreeMap::new();
    match shots_per_setting {
        None => {
            for (b, s) in bases.iter().zip(&settings) {
                let raw = exact_distribution(rho, s, noise, assignment)?;
                dists.insert(b.clone(), assignment.invert(&raw)?);
            }
        }
        Some(0) => return Err(Error::InvalidParameter("shots_per_setting must be >= 1".into())),
        Some(n) => {
            let sampler = ShotSampler::new(rho, &settings, noise, assignment, seed)?;
            for (k, b) in bases.iter().enumerate() {
                let records = sampler.sample_plan(&vec![k; n], (k * n) as u64);
                let counts = outcome_counts(&records, 2);
                dists.insert(b.clone(), mitigate_assignment(&counts, assignment)?);
            }
        }
    }
    expectations_from_distributions(&dists)
}

/// Frobenius-closest unit-trace positive semidefinite matrix.
///
/// The most negative eigenvalue is zeroed and its deficit spread evenly over
/// the remaining ones until none is negative.
pub fn mle_project(rho_linear: &OperatorMatrix) -> Result<DensityMatrix> {
    let tr = rho_linear.trace();
    if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
        return Err(Error::InvalidState(format!("trace {tr} is not 1")));
    }
    let eig = eig_hermitian(rho_linear)?;
    // Descending order.
    let mut lambda: Vec<f64> = eig.values.iter().rev().copied().collect();
    let vectors: Vec<&Vec<C64>> = eig.vectors.iter().rev().collect();
    let shift = (1.0 - lambda.iter().sum::<f64>()) / lambda.len() as f64;
    lambda.iter_mut().for_each(|l| *l += shift);
    let mut i = lambda.len();
    let mut deficit = 0.0;
    while i > 0 && lambda[i - 1] + deficit / (i as f64) < 0.0 {
        deficit += lambda[i - 1];
        lambda[i - 1] = 0.0;
        i -= 1;
    }
    for l in lambda.iter_mut().take(i) {
        *l += deficit / i as f64;
    }
    let mut out = OperatorMatrix::zeros(rho_linear.layout());
    let d = out.dim();
    for (l, v) in lambda.iter().zip(vectors) {
        if *l == 0.0 {
            continue;
        }
        for r in 0..d {
            for c in 0..d {
                let z = out.get(r, c) + v[r] * v[c].conj() * *l;
                out.set(r, c, z);
            }
        }
    }
    let out = out.hermitian_part();
    let tr = out.trace();
    DensityMatrix::new(out.scale_real(1.0 / tr.re))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub raw_expectations: BTreeMap<String, f64>,
    pub rho_linear: MatrixJson,
    pub rho_mle: MatrixJson,
    /// Spread across repeated datasets, when available.
    pub stderr: Option<f64>,
    pub method: String,
}

impl TomographyResult {
    pub fn from_expectations(expectations: BTreeMap<String, f64>) -> Result<(Self, DensityMatrix)> {
        let linear = density_matrix_from_paulis(&expectations)?;
        let mle = mle_project(&linear)?;
        Ok((
            Self {
                raw_expectations: expectations,
                rho_linear: MatrixJson::from(&linear),
                rho_mle: MatrixJson::from(mle.as_operator()),
                stderr: None,
                method: MLE_METHOD.to_string(),
            },
            mle,
        ))
    }
}

/// Standard error of the mean.
pub fn standard_error(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Some((var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::SpaceLayout;
    use approx::assert_abs_diff_eq;

    fn diag(values: &[f64]) -> OperatorMatrix {
        let n = values.len().trailing_zeros() as usize;
        let layout = if values.len() == 2 {
            SpaceLayout::single(2, "Q1")
        } else {
            SpaceLayout::qubits(n)
        };
        let d: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
        OperatorMatrix::diagonal(&layout, &d).unwrap()
    }

    #[test]
    fn truncation_oracles() {
        let p = mle_project(&diag(&[1.2, -0.2])).unwrap();
        assert_abs_diff_eq!(p.get(0, 0).re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.get(1, 1).re, 0.0, epsilon = 1e-12);
        let p = mle_project(&diag(&[0.7, 0.5, -0.1, -0.1])).unwrap();
        for (k, want) in [0.6, 0.4, 0.0, 0.0].iter().enumerate() {
            assert_abs_diff_eq!(p.get(k, k).re, *want, epsilon = 1e-12);
        }
    }

    #[test]
    fn physical_input_is_unchanged() {
        let rho = diag(&[0.1, 0.2, 0.3, 0.4]);
        let p = mle_project(&rho).unwrap();
        assert!(p.as_operator().max_abs_diff(&rho) < 1e-12);
    }

    #[test]
    fn basis_gates_and_signs() {
        assert_eq!(basis_gate('Z').unwrap(), (Gate::Id, 1.0));
        assert_eq!(basis_gate('Y').unwrap(), (Gate::X90, 1.0));
        assert_eq!(basis_gate('X').unwrap(), (Gate::Y90, -1.0));
        assert_eq!(basis_settings().len(), 9);
    }

    #[test]
    fn identity_word_is_one_under_noise() {
        let rho = DensityMatrix::maximally_mixed(&SpaceLayout::qubits(2));
        let a = AssignmentMatrix::illustrative(2);
        let e = measure_pauli_expectations(&rho, Some(50), RotationErrorModel::illustrative(), &a, 3).unwrap();
        assert_eq!(e["II"], 1.0);
        assert_eq!(e.len(), 16);
    }

    #[test]
    fn sem_of_constant_is_zero() {
        assert_eq!(standard_error(&[0.5; 9]), Some(0.0));
        assert_eq!(standard_error(&[0.5]), None);
    }
}
