// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Scalars and matrices reported from a state: fidelity, purity,
//! eigenstate populations and Pauli correlators.
//!
//! Two-qubit basis order is `|00⟩, |01⟩, |10⟩, |11⟩` with the first digit on
//! `Q1` and `0 = g`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{
    eig_hermitian, embed, identity, kron_vec, pauli_x, pauli_y, pauli_z, DensityMatrix, OperatorMatrix, SpaceLayout,
    C64, ONE, ZERO,
};

/// Values outside the physical range by more than this are upstream bugs.
pub const RANGE_TOL: f64 = 1e-6;

fn checked_clamp(value: f64, lo: f64, hi: f64, what: &str) -> Result<f64> {
    if value < lo - RANGE_TOL || value > hi + RANGE_TOL || !value.is_finite() {
        return Err(Error::InvalidState(format!("{what} = {value} outside [{lo}, {hi}]")));
    }
    Ok(value.clamp(lo, hi))
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_to_pure(rho: &DensityMatrix, psi: &[C64]) -> Result<f64> {
    if psi.len() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: psi.len(),
        });
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("target ket has norm² {norm}")));
    }
    let f = rho.as_operator().sandwich(psi, psi)?;
    checked_clamp(f.re, 0.0, 1.0, "fidelity")
}

fn sqrt_psd(op: &OperatorMatrix) -> Result<OperatorMatrix> {
    let eig = eig_hermitian(op)?;
    let d = op.dim();
    Ok(OperatorMatrix::from_fn(op.layout(), |r, c| {
        (0..d)
            .map(|k| eig.vectors[k][r] * eig.vectors[k][c].conj() * eig.values[k].max(0.0).sqrt())
            .sum()
    }))
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    let s = sqrt_psd(rho.as_operator())?;
    let inner = s.matmul(sigma.as_operator())?.matmul(&s)?.hermitian_part();
    let eig = eig_hermitian(&inner)?;
    let root: f64 = eig.values.iter().map(|v| v.max(0.0).sqrt()).sum();
    checked_clamp(root * root, 0.0, 1.0, "state fidelity")
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.as_operator().data().iter().map(|z| z.norm_sqr()).sum()
}

pub fn ket_00() -> Vec<C64> {
    vec![ONE, ZERO, ZERO, ZERO]
}

pub fn ket_11() -> Vec<C64> {
    vec![ZERO, ZERO, ZERO, ONE]
}

/// `(|01⟩ + sign·e^{−iφ}|10⟩)/√2`.
fn single_excitation(sign: f64, phi: f64) -> Vec<C64> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    vec![ZERO, s, s * C64::from_polar(sign, -phi), ZERO]
}

pub fn bell_plus() -> Vec<C64> {
    single_excitation(1.0, 0.0)
}

pub fn bell_minus() -> Vec<C64> {
    single_excitation(-1.0, 0.0)
}

/// `(|00⟩ + |11⟩)/√2`.
pub fn phi_plus() -> Vec<C64> {
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    vec![s, ZERO, ZERO, s]
}

/// The X-shaped mixture `½|−⟩⟨−| + ½|Φ+⟩⟨Φ+|`.
pub fn x_state() -> DensityMatrix {
    let l = SpaceLayout::qubits(2);
    let a = DensityMatrix::pure(&l, &bell_minus()).expect("normalised ket");
    let b = DensityMatrix::pure(&l, &phi_plus()).expect("normalised ket");
    DensityMatrix::mixture(&[(0.5, &a), (0.5, &b)]).expect("valid weights")
}

/// `½|+y,−y⟩⟨+y,−y| + ½|−y,+y⟩⟨−y,+y|`, a separable form of [`x_state`].
pub fn y_product_mixture() -> DensityMatrix {
    let s = FRAC_1_SQRT_2;
    let plus_y = [C64::new(s, 0.0), C64::new(0.0, s)];
    let minus_y = [C64::new(s, 0.0), C64::new(0.0, -s)];
    let l = SpaceLayout::qubits(2);
    let a = DensityMatrix::pure(&l, &kron_vec(&plus_y, &minus_y)).expect("normalised ket");
    let b = DensityMatrix::pure(&l, &kron_vec(&minus_y, &plus_y)).expect("normalised ket");
    DensityMatrix::mixture(&[(0.5, &a), (0.5, &b)]).expect("valid weights")
}

/// Relative dynamical phase picked up between the qubits before readout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EigenbasisPhase {
    phi: f64,
}

impl EigenbasisPhase {
    pub fn new(phi: f64) -> Self {
        Self {
            phi: phi.rem_euclid(2.0 * PI),
        }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `|ψ±⟩ = (|01⟩ ± e^{−iφ}|10⟩)/√2`.
    pub fn psi_plus(&self) -> Vec<C64> {
        single_excitation(1.0, self.phi)
    }

    pub fn psi_minus(&self) -> Vec<C64> {
        single_excitation(-1.0, self.phi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSet {
    pub gg: f64,
    pub plus: f64,
    pub minus: f64,
    pub ee: f64,
}

impl PopulationSet {
    pub fn total(&self) -> f64 {
        self.gg + self.plus + self.minus + self.ee
    }
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.layout().dims() != [2, 2] {
        return Err(Error::InvalidLayout(format!(
            "expected a two-qubit state, got dims {:?}",
            rho.layout().dims()
        )));
    }
    Ok(())
}

pub fn eigenstate_populations(rho: &DensityMatrix, phase: EigenbasisPhase) -> Result<PopulationSet> {
    require_two_qubits(rho)?;
    let p = |k: &[C64]| fidelity_to_pure(rho, k);
    Ok(PopulationSet {
        gg: p(&ket_00())?,
        plus: p(&phase.psi_plus())?,
        minus: p(&phase.psi_minus())?,
        ee: p(&ket_11())?,
    })
}

pub const PAULI_LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

fn pauli_letter(c: char) -> Result<OperatorMatrix> {
    Ok(match c {
        'I' => identity(2),
        'X' => pauli_x(),
        'Y' => pauli_y(),
        'Z' => pauli_z(),
        _ => return Err(Error::InvalidPauli(c.to_string())),
    })
}

/// `P₁ ⊗ P₂ ⊗ …` on `Q1, Q2, …`.
pub fn pauli_operator(word: &str) -> Result<OperatorMatrix> {
    let n = word.chars().count();
    if n == 0 {
        return Err(Error::InvalidPauli(String::new()));
    }
    let layout = SpaceLayout::qubits(n);
    let mut op = OperatorMatrix::identity(&layout);
    for (k, c) in word.chars().enumerate() {
        if c != 'I' {
            op = &op * &embed(&pauli_letter(c)?, &format!("Q{}", k + 1), &layout)?;
        } else {
            pauli_letter(c)?;
        }
    }
    Ok(op)
}

/// All `4ⁿ` words in `I, X, Y, Z` order, first letter slowest.
pub fn pauli_words(n: usize) -> Vec<String> {
    let mut words = vec![String::new()];
    for _ in 0..n {
        words = words
            .iter()
            .flat_map(|w| PAULI_LETTERS.iter().map(move |c| format!("{w}{c}")))
            .collect();
    }
    words
}

/// `Tr(ρP)`.
pub fn pauli_expectation(rho: &DensityMatrix, word: &str) -> Result<f64> {
    let n = word.chars().count();
    if rho.layout().len() != n || rho.layout().dims().iter().any(|&d| d != 2) {
        return Err(Error::DimensionMismatch {
            expected: rho.layout().len(),
            found: n,
        });
    }
    let p = pauli_operator(word)?;
    let d = rho.dim();
    let mut acc = ZERO;
    for i in 0..d {
        for j in 0..d {
            acc += p.get(i, j) * rho.get(j, i);
        }
    }
    if acc.im.abs() > 1e-9 {
        return Err(Error::InvalidState(format!("⟨{word}⟩ has imaginary part {}", acc.im)));
    }
    checked_clamp(acc.re, -1.0, 1.0, word)
}

pub fn pauli_expectations(rho: &DensityMatrix) -> Result<BTreeMap<String, f64>> {
    pauli_words(rho.layout().len())
        .into_iter()
        .map(|w| pauli_expectation(rho, &w).map(|v| (w, v)))
        .collect()
}

/// `ρ = 2⁻ⁿ Σ ⟨P⟩ P`; Hermitian and unit trace, not necessarily positive.
pub fn density_matrix_from_paulis(expectations: &BTreeMap<String, f64>) -> Result<OperatorMatrix> {
    let n = expectations
        .keys()
        .next()
        .map(|w| w.chars().count())
        .ok_or_else(|| Error::MissingWord("II".into()))?;
    let layout = SpaceLayout::qubits(n);
    let scale = 1.0 / (1usize << n) as f64;
    let mut rho = OperatorMatrix::zeros(&layout);
    for w in pauli_words(n) {
        let v = *expectations.get(&w).ok_or_else(|| Error::MissingWord(w.clone()))?;
        if v != 0.0 {
            rho = &rho + &pauli_operator(&w)?.scale_real(v * scale);
        }
    }
    Ok(rho)
}

/// Imprints the dynamical phase: `|1⟩` on `Q1` acquires `e^{−iφ}`.
pub fn apply_dynamical_phase(rho: &DensityMatrix, phi: f64) -> Result<DensityMatrix> {
    require_two_qubits(rho)?;
    let l = SpaceLayout::single(2, "Q1");
    let r = OperatorMatrix::diagonal(&l, &[ONE, C64::from_polar(1.0, -phi)])?;
    let r = embed(&r, "Q1", rho.layout())?;
    let out = r.matmul(rho.as_operator())?.matmul(&r.adjoint())?;
    DensityMatrix::new(out.hermitian_part())
}

/// `⟨X₁X₂ + Y₁Y₂⟩`.
pub fn exchange_correlator(rho: &DensityMatrix) -> Result<f64> {
    Ok(pauli_expectation(rho, "XX")? + pauli_expectation(rho, "YY")?)
}

/// Dynamical phase of a reference state prepared as `|+⟩`: the compensation
/// angle that maximises `⟨X₁X₂ + Y₁Y₂⟩`, located to 1e-4 rad by a coarse
/// scan followed by golden-section search.
pub fn calibrate_phase(reference: &DensityMatrix) -> Result<EigenbasisPhase> {
    require_two_qubits(reference)?;
    let objective = |theta: f64| -> Result<f64> { exchange_correlator(&apply_dynamical_phase(reference, -theta)?) };
    let grid = 64;
    let step = 2.0 * PI / grid as f64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..grid {
        let t = k as f64 * step;
        let v = objective(t)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (objective(c)?, objective(d)?);
    while b - a > 1e-5 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = objective(d)?;
        }
    }
    Ok(EigenbasisPhase::new(0.5 * (a + b)))
}

/// Conventional single-qubit Pauli for use outside this module.
pub fn pauli_matrix(letter: char) -> Result<OperatorMatrix> {
    pauli_letter(letter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two() -> SpaceLayout {
        SpaceLayout::qubits(2)
    }

    #[test]
    fn state_fidelity_reduces_to_pure_overlap() {
        let mixed = DensityMatrix::maximally_mixed(&SpaceLayout::qubits(2));
        let pure = DensityMatrix::pure(&SpaceLayout::qubits(2), &bell_minus()).unwrap();
        assert_abs_diff_eq!(state_fidelity(&mixed, &pure).unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(state_fidelity(&pure, &pure).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state_fidelity(&mixed, &mixed).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let minus = DensityMatrix::pure(&two(), &bell_minus()).unwrap();
        assert_abs_diff_eq!(fidelity_to_pure(&minus, &bell_minus()).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            fidelity_to_pure(&x_state(), &bell_minus()).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let mixed = DensityMatrix::maximally_mixed(&two());
        assert_abs_diff_eq!(fidelity_to_pure(&mixed, &phi_plus()).unwrap(), 0.25, epsilon = 1e-15);
        assert!(fidelity_to_pure(&mixed, &[ONE, ZERO]).is_err());
    }

    #[test]
    fn purity_examples() {
        assert_abs_diff_eq!(purity(&x_state()), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(purity(&DensityMatrix::maximally_mixed(&two())), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn populations_of_product_state() {
        let ge = DensityMatrix::basis_state(&two(), 1).unwrap();
        for phi in [0.0, 1.0, 2.3, 5.9] {
            let p = eigenstate_populations(&ge, EigenbasisPhase::new(phi)).unwrap();
            assert_abs_diff_eq!(p.plus, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(p.minus, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(p.gg + p.ee, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn bell_stabilizers() {
        let phi = DensityMatrix::pure(&two(), &phi_plus()).unwrap();
        assert_abs_diff_eq!(pauli_expectation(&phi, "XX").unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pauli_expectation(&phi, "ZZ").unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pauli_expectation(&phi, "YY").unwrap(), -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pauli_expectation(&phi, "II").unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(pauli_expectation(&phi, "XQ"), Err(Error::InvalidPauli(_))));
    }

    #[test]
    fn missing_word_is_reported() {
        let mut m = BTreeMap::new();
        m.insert("II".to_string(), 1.0);
        assert!(matches!(density_matrix_from_paulis(&m), Err(Error::MissingWord(_))));
    }

    #[test]
    fn word_order() {
        let w = pauli_words(2);
        assert_eq!(w.len(), 16);
        assert_eq!(w[0], "II");
        assert_eq!(w[1], "IX");
        assert_eq!(w[15], "ZZ");
    }
}
