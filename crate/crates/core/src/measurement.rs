// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Single-shot readout emulation: basis-change pulses, Born sampling,
//! per-qubit assignment error, and assignment-matrix mitigation.
//!
//! Shot `i` of a run draws from its own ChaCha8 stream (`seed`, stream `i`),
//! so any sharding of shots reproduces the serial record list.

use std::f64::consts::FRAC_PI_2;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlinalg::{identity, kron_vec, pauli_x, pauli_y, DensityMatrix, OperatorMatrix, C64, I, ONE};

/// Basis-change pulse applied before a computational-basis readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    X90,
    Y90,
    Id,
}

impl Gate {
    pub const ALL: [Gate; 3] = [Gate::X90, Gate::Y90, Gate::Id];

    pub fn index(self) -> usize {
        match self {
            Gate::X90 => 0,
            Gate::Y90 => 1,
            Gate::Id => 2,
        }
    }

    pub fn from_index(k: usize) -> Result<Self> {
        Gate::ALL
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("gate index {k}")))
    }

    /// `exp(−iθσ/2)` with `θ = π/2 + over_rotation`; `Id` is not pulsed.
    pub fn unitary(self, over_rotation: f64) -> OperatorMatrix {
        let axis = match self {
            Gate::X90 => pauli_x(),
            Gate::Y90 => pauli_y(),
            Gate::Id => return identity(2),
        };
        let half = 0.5 * (FRAC_PI_2 + over_rotation);
        &identity(2).scale_real(half.cos()) - &axis.scale(I * half.sin())
    }

    pub fn is_pulse(self) -> bool {
        self != Gate::Id
    }
}

/// One gate per qubit, `Q1` first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CliffordSetting(pub Vec<Gate>);

impl CliffordSetting {
    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    /// Base-3 index of the gate list, first qubit most significant.
    pub fn id(&self) -> usize {
        self.0.iter().fold(0, |acc, g| acc * 3 + g.index())
    }

    pub fn from_id(id: usize, n_qubits: usize) -> Result<Self> {
        if id >= 3usize.pow(n_qubits as u32) {
            return Err(Error::InvalidParameter(format!(
                "setting id {id} for {n_qubits} qubits"
            )));
        }
        let mut gates = vec![Gate::Id; n_qubits];
        let mut rest = id;
        for k in (0..n_qubits).rev() {
            gates[k] = Gate::from_index(rest % 3)?;
            rest /= 3;
        }
        Ok(Self(gates))
    }

    pub fn all(n_qubits: usize) -> Vec<Self> {
        (0..3usize.pow(n_qubits as u32))
            .map(|id| Self::from_id(id, n_qubits).expect("id in range"))
            .collect()
    }
}

/// Per-qubit `A[b'][b] = P(read b' | true b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    per_qubit: Vec<[[f64; 2]; 2]>,
}

impl AssignmentMatrix {
    pub fn new(per_qubit: Vec<[[f64; 2]; 2]>) -> Result<Self> {
        for (q, a) in per_qubit.iter().enumerate() {
            for (col, s) in [a[0][0] + a[1][0], a[0][1] + a[1][1]].into_iter().enumerate() {
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "assignment matrix of qubit {q}: column {col} sums to {s}"
                    )));
                }
            }
            if a.iter().flatten().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidParameter(format!(
                    "assignment matrix of qubit {q} has entries outside [0, 1]"
                )));
            }
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-12 {
                return Err(Error::SingularAssignment(det));
            }
        }
        Ok(Self { per_qubit })
    }

    pub fn ideal(n_qubits: usize) -> Self {
        Self::symmetric(n_qubits, 0.0).expect("identity is valid")
    }

    /// Each bit flips with probability `p` regardless of its value.
    pub fn symmetric(n_qubits: usize, p: f64) -> Result<Self> {
        Self::new(vec![[[1.0 - p, p], [p, 1.0 - p]]; n_qubits])
    }

    /// Readout half of the illustrative imperfection set: 1.6% symmetric flips.
    pub fn illustrative(n_qubits: usize) -> Self {
        Self::symmetric(n_qubits, 0.016).expect("valid flip probability")
    }

    pub fn n_qubits(&self) -> usize {
        self.per_qubit.len()
    }

    pub fn qubit(&self, q: usize) -> [[f64; 2]; 2] {
        self.per_qubit[q]
    }

    /// Probability that bit `true_bit` on qubit `q` is read as `1 − true_bit`.
    pub fn flip_probability(&self, q: usize, true_bit: u8) -> f64 {
        let b = true_bit as usize;
        self.per_qubit[q][1 - b][b]
    }

    fn apply_factors(probs: &[f64], factors: &[[[f64; 2]; 2]]) -> Vec<f64> {
        let n = factors.len();
        let mut out = probs.to_vec();
        for (q, m) in factors.iter().enumerate() {
            let stride = 1 << (n - 1 - q);
            let mut next = vec![0.0; out.len()];
            for (idx, &p) in out.iter().enumerate() {
                let b = (idx / stride) & 1;
                let base = idx - b * stride;
                next[base] += m[0][b] * p;
                next[base + stride] += m[1][b] * p;
            }
            out = next;
        }
        out
    }

    /// `(A₁ ⊗ A₂ ⊗ …) p`.
    pub fn corrupt(&self, probs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(probs.len())?;
        Ok(Self::apply_factors(probs, &self.per_qubit))
    }

    /// `(A₁ ⊗ A₂ ⊗ …)⁻¹ p`.
    pub fn invert(&self, probs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(probs.len())?;
        let inv: Vec<[[f64; 2]; 2]> = self
            .per_qubit
            .iter()
            .map(|a| {
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
            })
            .collect();
        Ok(Self::apply_factors(probs, &inv))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let expected = 1usize << self.n_qubits();
        if len != expected {
            return Err(Error::DimensionMismatch { expected, found: len });
        }
        Ok(())
    }
}

/// Imperfect basis-change pulses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RotationErrorModel {
    /// Systematic angle error per π/2 pulse (rad).
    pub over_rotation: f64,
    /// Per-pulse probability that the qubit is fully depolarised.
    pub depolarizing: f64,
}

impl RotationErrorModel {
    /// Illustrative pulse imperfections: 0.02 rad over-rotation and 0.003
    /// depolarising probability per pulse. Tunable, not a hardware claim.
    pub fn illustrative() -> Self {
        Self {
            over_rotation: 0.02,
            depolarizing: 0.003,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.over_rotation.abs() < std::f64::consts::FRAC_PI_4) {
            return Err(Error::InvalidParameter(format!(
                "over_rotation {} must satisfy |θ| < π/4",
                self.over_rotation
            )));
        }
        if !(0.0..1.0).contains(&self.depolarizing) {
            return Err(Error::InvalidParameter(format!(
                "depolarizing probability {} must lie in [0, 1)",
                self.depolarizing
            )));
        }
        Ok(())
    }
}

/// Measured bits (0 = g, 1 = e) for one shot, `Q1` first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub setting_id: usize,
    pub bits: Vec<u8>,
}

impl ShotRecord {
    /// Bitstring as a big-endian outcome index.
    pub fn outcome(&self) -> usize {
        self.bits.iter().fold(0, |acc, &b| acc * 2 + b as usize)
    }
}

fn local_unitaries(gates: &[Gate], over_rotation: f64) -> Vec<OperatorMatrix> {
    gates.iter().map(|g| g.unitary(over_rotation)).collect()
}

/// `p(b) = ⟨b|UρU†|b⟩` for `U = ⊗ₙ Uₙ`.
pub fn born_probabilities(rho: &DensityMatrix, rotations: &[OperatorMatrix]) -> Result<Vec<f64>> {
    let n = rotations.len();
    let d = rho.dim();
    if d != 1 << n || rho.layout().dims().iter().any(|&k| k != 2) {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: d,
        });
    }
    if rotations.iter().any(|u| u.dim() != 2) {
        return Err(Error::InvalidParameter("rotations must be single-qubit".into()));
    }
    // Row b of U is the tensor product of rows of the factors.
    let mut probs = Vec::with_capacity(d);
    for b in 0..d {
        let mut row = vec![ONE];
        for (q, u) in rotations.iter().enumerate() {
            let bit = (b >> (n - 1 - q)) & 1;
            row = kron_vec(&row, &[u.get(bit, 0), u.get(bit, 1)]);
        }
        let bra: Vec<C64> = row.iter().map(|z| z.conj()).collect();
        let p = rho.as_operator().sandwich(&bra, &bra)?.re;
        if p < -1e-10 {
            return Err(Error::InvalidState(format!("negative Born probability {p}")));
        }
        probs.push(p.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("Born probabilities sum to {total}")));
    }
    Ok(probs.into_iter().map(|p| p / total).collect())
}

/// Deterministic per-shot generator.
pub fn shot_rng(seed: u64, shot_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot_index);
    rng
}

/// Samples noisy readouts for a sequence of shots; shot `k` uses setting
/// `settings[plan[k]]` and RNG stream `first_shot + k`.
pub struct ShotSampler<'a> {
    settings: &'a [CliffordSetting],
    distributions: Vec<Vec<f64>>,
    noise: RotationErrorModel,
    assignment: &'a AssignmentMatrix,
    seed: u64,
}

impl<'a> ShotSampler<'a> {
    pub fn new(
        rho: &DensityMatrix,
        settings: &'a [CliffordSetting],
        noise: RotationErrorModel,
        assignment: &'a AssignmentMatrix,
        seed: u64,
    ) -> Result<Self> {
        noise.validate()?;
        let n = assignment.n_qubits();
        let distributions = settings
            .iter()
            .map(|s| {
                if s.n_qubits() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: s.n_qubits(),
                    });
                }
                born_probabilities(rho, &local_unitaries(&s.0, noise.over_rotation))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            settings,
            distributions,
            noise,
            assignment,
            seed,
        })
    }

    pub fn sample(&self, setting: usize, shot_index: u64) -> ShotRecord {
        let gates = &self.settings[setting].0;
        let n = gates.len();
        let mut rng = shot_rng(self.seed, shot_index);
        let depolarized: Vec<bool> = gates
            .iter()
            .map(|g| g.is_pulse() && rng.random::<f64>() < self.noise.depolarizing)
            .collect();
        let u: f64 = rng.random();
        let dist = &self.distributions[setting];
        let mut acc = 0.0;
        let mut outcome = dist.len() - 1;
        for (k, &p) in dist.iter().enumerate() {
            acc += p;
            if u < acc {
                outcome = k;
                break;
            }
        }
        let mut bits: Vec<u8> = (0..n).map(|q| ((outcome >> (n - 1 - q)) & 1) as u8).collect();
        for q in 0..n {
            let coin: f64 = rng.random();
            if depolarized[q] {
                bits[q] = u8::from(coin < 0.5);
            }
        }
        for (q, bit) in bits.iter_mut().enumerate() {
            let r: f64 = rng.random();
            if r < self.assignment.flip_probability(q, *bit) {
                *bit ^= 1;
            }
        }
        ShotRecord {
            setting_id: self.settings[setting].id(),
            bits,
        }
    }

    pub fn sample_plan(&self, plan: &[usize], first_shot: u64) -> Vec<ShotRecord> {
        plan.iter()
            .enumerate()
            .map(|(k, &s)| self.sample(s, first_shot + k as u64))
            .collect()
    }
}

/// `n_shots` readouts of `rho` after the pulses in `setting`.
pub fn sample_shots(
    rho: &DensityMatrix,
    setting: &CliffordSetting,
    n_shots: usize,
    noise: RotationErrorModel,
    assignment: &AssignmentMatrix,
    seed: u64,
) -> Result<Vec<ShotRecord>> {
    if n_shots == 0 {
        return Err(Error::InvalidParameter("n_shots must be >= 1".into()));
    }
    let settings = std::slice::from_ref(setting);
    let sampler = ShotSampler::new(rho, settings, noise, assignment, seed)?;
    Ok(sampler.sample_plan(&vec![0; n_shots], 0))
}

/// Outcome counts over `2ⁿ` bitstrings.
pub fn outcome_counts(records: &[ShotRecord], n_qubits: usize) -> Vec<f64> {
    let mut counts = vec![0.0; 1 << n_qubits];
    for r in records {
        counts[r.outcome()] += 1.0;
    }
    counts
}

/// Normalises `counts` and applies `(A₁ ⊗ A₂ ⊗ …)⁻¹`. The result sums to one
/// and may contain small negative quasi-probabilities.
pub fn mitigate_assignment(counts: &[f64], assignment: &AssignmentMatrix) -> Result<Vec<f64>> {
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyDataset);
    }
    let freq: Vec<f64> = counts.iter().map(|c| c / total).collect();
    assignment.invert(&freq)
}

fn bit_char(b: u8) -> char {
    if b == 0 {
        'g'
    } else {
        'e'
    }
}

/// CSV with columns `setting_id, Q1, Q2, …` and one `g`/`e` per qubit.
pub fn write_shots_csv<W: Write>(writer: W, records: &[ShotRecord], n_qubits: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["setting_id".to_string()];
    header.extend((1..=n_qubits).map(|k| format!("Q{k}")));
    w.write_record(&header)?;
    for r in records {
        if r.bits.len() != n_qubits {
            return Err(Error::DimensionMismatch {
                expected: n_qubits,
                found: r.bits.len(),
            });
        }
        let mut row = vec![r.setting_id.to_string()];
        row.extend(r.bits.iter().map(|&b| bit_char(b).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_shots_csv<R: Read>(reader: R) -> Result<(Vec<ShotRecord>, usize)> {
    let mut rd = csv::Reader::from_reader(reader);
    let n_qubits = rd.headers()?.len().saturating_sub(1);
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let setting_id = row
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad setting_id in {row:?}")))?;
        let bits = (1..=n_qubits)
            .map(|k| match row.get(k) {
                Some("g") => Ok(0),
                Some("e") => Ok(1),
                other => Err(Error::Parse(format!("bad bit {other:?}"))),
            })
            .collect::<Result<_>>()?;
        out.push(ShotRecord { setting_id, bits });
    }
    Ok((out, n_qubits))
}
