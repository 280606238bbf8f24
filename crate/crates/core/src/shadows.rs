// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Classical shadows from random local Clifford settings `{X90, Y90, Id}`.
//!
//! A snapshot is `⊗ₙ (αₙ Uₙ†|bₙ⟩⟨bₙ|Uₙ − βₙ I)`, with `α = 3, β = 1` for the
//! standard estimator and calibrated values for the robust one. Each qubit
//! factor is one of six 2×2 matrices (three gates, two outcomes), so a record
//! reduces to a snapshot type index and estimators work on lookup tables.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::{
    read_shots_csv, write_shots_csv, AssignmentMatrix, CliffordSetting, Gate, RotationErrorModel, ShotRecord,
    ShotSampler,
};
use crate::qlinalg::{DensityMatrix, OperatorMatrix, SpaceLayout, C64, ONE, ZERO};

/// Stream reserved for drawing settings; shot streams count up from zero.
const SETTINGS_STREAM: u64 = u64::MAX;

/// i.i.d. uniform settings over the `3ⁿ` gate combinations.
pub fn draw_settings(n_qubits: usize, n_u: usize, seed: u64) -> Vec<CliffordSetting> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SETTINGS_STREAM);
    (0..n_u)
        .map(|_| CliffordSetting((0..n_qubits).map(|_| Gate::ALL[rng.random_range(0..3)]).collect()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowMetadata {
    pub n_qubits: usize,
    pub n_u: usize,
    pub n_m: usize,
    pub seed: u64,
    /// Number of equal, contiguous acquisition runs.
    pub runs: usize,
    #[serde(default)]
    pub calibration: Option<CalibrationResult>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShadowDataset {
    pub records: Vec<ShotRecord>,
    pub meta: ShadowMetadata,
}

impl ShadowDataset {
    pub fn new(records: Vec<ShotRecord>, meta: ShadowMetadata) -> Result<Self> {
        if records.len() != meta.n_u * meta.n_m {
            return Err(Error::InvalidParameter(format!(
                "{} records but N_U·N_M = {}",
                records.len(),
                meta.n_u * meta.n_m
            )));
        }
        if meta.runs == 0 || !records.len().is_multiple_of(meta.runs) {
            return Err(Error::InvalidParameter(format!(
                "{} records do not split into {} runs",
                records.len(),
                meta.runs
            )));
        }
        if let Some(r) = records.iter().find(|r| r.bits.len() != meta.n_qubits) {
            return Err(Error::DimensionMismatch {
                expected: meta.n_qubits,
                found: r.bits.len(),
            });
        }
        Ok(Self { records, meta })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.meta.n_qubits
    }

    /// Snapshot type of each record: per qubit `2·gate + bit`, first qubit
    /// most significant in base 6.
    fn types(&self) -> Result<Vec<usize>> {
        let n = self.n_qubits();
        self.records
            .iter()
            .map(|r| {
                let s = CliffordSetting::from_id(r.setting_id, n)?;
                Ok(s.0
                    .iter()
                    .zip(&r.bits)
                    .fold(0, |acc, (g, &b)| acc * 6 + 2 * g.index() + b as usize))
            })
            .collect()
    }

    pub fn write<P: AsRef<Path>>(&self, csv_path: P, json_path: P) -> Result<()> {
        let f = std::fs::File::create(csv_path)?;
        write_shots_csv(std::io::BufWriter::new(f), &self.records, self.n_qubits())?;
        let mut j = std::fs::File::create(json_path)?;
        serde_json::to_writer_pretty(&mut j, &self.meta)?;
        j.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<P: AsRef<Path>>(csv_path: P, json_path: P) -> Result<Self> {
        let (records, n) = read_shots_csv(std::io::BufReader::new(std::fs::File::open(csv_path)?))?;
        let mut text = String::new();
        std::fs::File::open(json_path)?.read_to_string(&mut text)?;
        let meta: ShadowMetadata = serde_json::from_str(&text)?;
        if n != meta.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: meta.n_qubits,
                found: n,
            });
        }
        Self::new(records, meta)
    }
}

/// Shots of `rho` under `n_u` random settings, each repeated `n_m` times.
#[allow(clippy::too_many_arguments)]
pub fn generate_dataset(
    rho: &DensityMatrix,
    n_u: usize,
    n_m: usize,
    runs: usize,
    noise: RotationErrorModel,
    assignment: &AssignmentMatrix,
    seed: u64,
) -> Result<ShadowDataset> {
    if n_u == 0 || n_m == 0 {
        return Err(Error::InvalidParameter("N_U and N_M must be >= 1".into()));
    }
    let n = assignment.n_qubits();
    let drawn = draw_settings(n, n_u, seed);
    let all = CliffordSetting::all(n);
    let plan: Vec<usize> = drawn.iter().flat_map(|s| std::iter::repeat_n(s.id(), n_m)).collect();
    let sampler = ShotSampler::new(rho, &all, noise, assignment, seed)?;
    let records = sampler.sample_plan(&plan, 0);
    ShadowDataset::new(
        records,
        ShadowMetadata {
            n_qubits: n,
            n_u,
            n_m,
            seed,
            runs,
            calibration: None,
        },
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitCalibration {
    pub c: f64,
    pub g: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl QubitCalibration {
    pub fn from_g(g: f64, qubit: usize) -> Result<Self> {
        if !(g > 0.5) {
            return Err(Error::NoiseTooStrong { qubit, survival: g });
        }
        Ok(Self {
            c: (g + 1.0) / 3.0,
            g,
            alpha: 3.0 / (2.0 * g - 1.0),
            beta: (2.0 - g) / (2.0 * g - 1.0),
        })
    }

    pub fn ideal() -> Self {
        Self::from_g(1.0, 0).expect("G = 1 is valid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub qubits: Vec<QubitCalibration>,
}

impl CalibrationResult {
    pub fn standard(n_qubits: usize) -> Self {
        Self {
            qubits: vec![QubitCalibration::ideal(); n_qubits],
        }
    }
}

/// `|⟨b|U|g⟩|²` for the nominal pulse.
fn ground_overlap(gate: Gate, bit: u8) -> f64 {
    let u = gate.unitary(0.0);
    u.get(bit as usize, 0).norm_sqr()
}

/// Noise-channel fidelity from a dataset taken on the all-ground state:
/// `Cₙ` is the average of `|⟨bₙ|Uₙ|g⟩|²` over shots and `Gₙ = 3Cₙ − 1`.
pub fn calibrate(ground_data: &ShadowDataset) -> Result<CalibrationResult> {
    if ground_data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = ground_data.n_qubits();
    let mut sums = vec![0.0; n];
    for r in &ground_data.records {
        let s = CliffordSetting::from_id(r.setting_id, n)?;
        for ((sum, &gate), &bit) in sums.iter_mut().zip(&s.0).zip(&r.bits) {
            *sum += ground_overlap(gate, bit);
        }
    }
    let qubits = sums
        .iter()
        .enumerate()
        .map(|(q, &s)| {
            let c = s / ground_data.len() as f64;
            let mut cal = QubitCalibration::from_g(3.0 * c - 1.0, q)?;
            cal.c = c;
            Ok(cal)
        })
        .collect::<Result<_>>()?;
    Ok(CalibrationResult { qubits })
}

/// `α U†|b⟩⟨b|U − β I` for one qubit.
pub fn snapshot_factor(gate: Gate, bit: u8, cal: &QubitCalibration) -> OperatorMatrix {
    let u = gate.unitary(0.0);
    let l = u.layout().clone();
    let row: Vec<C64> = (0..2).map(|k| u.get(bit as usize, k)).collect();
    let ket: Vec<C64> = row.iter().map(|z| z.conj()).collect();
    let proj = OperatorMatrix::outer(&l, &ket, &ket).expect("2-dim");
    &proj.scale_real(cal.alpha) - &OperatorMatrix::identity(&l).scale_real(cal.beta)
}

/// Full snapshot on the qubit register.
pub fn snapshot(
    setting: &CliffordSetting,
    bits: &[u8],
    calibration: Option<&CalibrationResult>,
) -> Result<OperatorMatrix> {
    let n = setting.n_qubits();
    if bits.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bits.len(),
        });
    }
    let ideal = CalibrationResult::standard(n);
    let cal = calibration.unwrap_or(&ideal);
    if cal.qubits.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cal.qubits.len(),
        });
    }
    let mut out: Option<OperatorMatrix> = None;
    for (q, ((&gate, &bit), qc)) in setting.0.iter().zip(bits).zip(&cal.qubits).enumerate() {
        let label = format!("Q{}", q + 1);
        let f = snapshot_factor(gate, bit, qc).with_layout(&SpaceLayout::single(2, &label))?;
        out = Some(match out {
            None => f,
            Some(acc) => acc.kron(&f)?,
        });
    }
    out.expect("at least one qubit").with_layout(&SpaceLayout::qubits(n))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadowMethod {
    Standard,
    Robust,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub k: usize,
    pub method: ShadowMethod,
    /// Records dropped so that `K` divides the count.
    pub truncated: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub k: usize,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            k: 100,
            n_boot: 400,
            seed: 0,
        }
    }
}

/// Median; mean of the middle pair for even length.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median over `k` equal consecutive groups of per-group means.
pub fn median_of_means(values: &[f64], k: usize) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k > values.len() {
        return Err(Error::GroupTooSmall(values.len() / k.max(1)));
    }
    let m = values.len() / k;
    let mut means: Vec<f64> = values[..m * k]
        .chunks(m)
        .map(|c| c.iter().sum::<f64>() / m as f64)
        .collect();
    Ok(median(&mut means))
}

fn all_factors(cal: &CalibrationResult) -> Vec<[OperatorMatrix; 6]> {
    cal.qubits
        .iter()
        .map(|c| std::array::from_fn(|t| snapshot_factor(Gate::ALL[t / 2], (t % 2) as u8, c)))
        .collect()
}

/// `Tr(O · ρ̂_t)` for every snapshot type `t`.
fn observable_table(observable: &OperatorMatrix, cal: &CalibrationResult) -> Result<Vec<f64>> {
    let n = cal.qubits.len();
    if observable.dim() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: observable.dim(),
        });
    }
    let herr = observable.hermiticity_error();
    if herr > 1e-10 * observable.max_abs().max(1.0) {
        return Err(Error::NotHermitian(herr));
    }
    let factors = all_factors(cal);
    let count = 6usize.pow(n as u32);
    let d = 1 << n;
    (0..count)
        .map(|t| {
            let mut digits = vec![0; n];
            let mut rest = t;
            for q in (0..n).rev() {
                digits[q] = rest % 6;
                rest /= 6;
            }
            // Tr(O ⊗ₙ σₙ) = Σ_{r,c} O[r][c] Πₙ σₙ[cₙ][rₙ].
            let mut acc = ZERO;
            for r in 0..d {
                for c in 0..d {
                    let o = observable.get(r, c);
                    if o == ZERO {
                        continue;
                    }
                    let mut prod = ONE;
                    for q in 0..n {
                        let shift = n - 1 - q;
                        prod *= factors[q][digits[q]].get((c >> shift) & 1, (r >> shift) & 1);
                    }
                    acc += o * prod;
                }
            }
            Ok(acc.re)
        })
        .collect()
}

/// `Tr(ρ̂_s ρ̂_t)` for every pair of snapshot types.
fn overlap_table(cal: &CalibrationResult) -> Vec<f64> {
    let n = cal.qubits.len();
    let factors = all_factors(cal);
    let local: Vec<[[f64; 6]; 6]> = factors
        .iter()
        .map(|f| std::array::from_fn(|a| std::array::from_fn(|b| f[a].matmul(&f[b]).expect("2x2").trace().re)))
        .collect();
    let count = 6usize.pow(n as u32);
    let mut table = vec![1.0; count * count];
    for s in 0..count {
        for t in 0..count {
            let (mut rs, mut rt) = (s, t);
            let mut v = 1.0;
            for q in (0..n).rev() {
                v *= local[q][rs % 6][rt % 6];
                rs /= 6;
                rt /= 6;
            }
            table[s * count + t] = v;
        }
    }
    table
}

fn method_of(calibration: Option<&CalibrationResult>) -> ShadowMethod {
    if calibration.is_some() {
        ShadowMethod::Robust
    } else {
        ShadowMethod::Standard
    }
}

fn resolve_calibration(dataset: &ShadowDataset, calibration: Option<&CalibrationResult>) -> Result<CalibrationResult> {
    let n = dataset.n_qubits();
    let cal = calibration.cloned().unwrap_or_else(|| CalibrationResult::standard(n));
    if cal.qubits.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: cal.qubits.len(),
        });
    }
    Ok(cal)
}

fn truncation(len: usize, k: usize) -> Result<usize> {
    if len == 0 {
        return Err(Error::EmptyDataset);
    }
    if k == 0 || k > len {
        return Err(Error::GroupTooSmall(len / k.max(1)));
    }
    Ok(len % k)
}

/// Median-of-means estimate of `Tr(Oρ)` with a bootstrap standard error.
pub fn estimate_observable(
    dataset: &ShadowDataset,
    observable: &OperatorMatrix,
    calibration: Option<&CalibrationResult>,
    opts: &EstimatorOptions,
) -> Result<Estimate> {
    let truncated = truncation(dataset.len(), opts.k)?;
    let cal = resolve_calibration(dataset, calibration)?;
    let table = observable_table(observable, &cal)?;
    let types = dataset.types()?;
    let estimator = |idx: &[usize]| -> Result<f64> {
        let values: Vec<f64> = idx.iter().map(|&i| table[types[i]]).collect();
        median_of_means(&values, opts.k)
    };
    let all: Vec<usize> = (0..dataset.len()).collect();
    let value = estimator(&all)?;
    let stderr = bootstrap_error(dataset.len(), dataset.meta.runs, estimator, opts.n_boot, opts.seed)?;
    Ok(Estimate {
        value,
        stderr,
        k: opts.k,
        method: method_of(calibration),
        truncated,
    })
}

/// Median over groups of the U-statistic `Σ_{i≠j} Tr(ρ̂_i ρ̂_j) / (M(M−1))`.
pub fn estimate_purity(
    dataset: &ShadowDataset,
    calibration: Option<&CalibrationResult>,
    opts: &EstimatorOptions,
) -> Result<Estimate> {
    let truncated = truncation(dataset.len(), opts.k)?;
    let m = dataset.len() / opts.k;
    if m < 2 {
        return Err(Error::GroupTooSmall(m));
    }
    let cal = resolve_calibration(dataset, calibration)?;
    let table = overlap_table(&cal);
    let count = 6usize.pow(dataset.n_qubits() as u32);
    let types = dataset.types()?;
    let estimator = |idx: &[usize]| -> Result<f64> {
        let m = idx.len() / opts.k;
        if m < 2 {
            return Err(Error::GroupTooSmall(m));
        }
        let mut per_group: Vec<f64> = idx[..m * opts.k]
            .chunks(m)
            .map(|g| group_purity(g.iter().map(|&i| types[i]), &table, count, m))
            .collect();
        Ok(median(&mut per_group))
    };
    let all: Vec<usize> = (0..dataset.len()).collect();
    let value = estimator(&all)?;
    let stderr = bootstrap_error(dataset.len(), dataset.meta.runs, estimator, opts.n_boot, opts.seed)?;
    Ok(Estimate {
        value,
        stderr,
        k: opts.k,
        method: method_of(calibration),
        truncated,
    })
}

fn group_purity(types: impl Iterator<Item = usize>, table: &[f64], count: usize, m: usize) -> f64 {
    let mut hist = vec![0.0; count];
    for t in types {
        hist[t] += 1.0;
    }
    let occupied: Vec<usize> = (0..count).filter(|&t| hist[t] > 0.0).collect();
    let mut sum = 0.0;
    for &s in &occupied {
        for &t in &occupied {
            sum += hist[s] * hist[t] * table[s * count + t];
        }
        sum -= hist[s] * table[s * count + s];
    }
    sum / (m as f64 * (m as f64 - 1.0))
}

/// Bootstrap standard error of `estimator`, which receives record indices.
///
/// Records are resampled with replacement `n_boot` times and the standard
/// deviation of the re-estimates is returned. With `runs > 1` each run is
/// bootstrapped on its own and the per-run deviations combine into the
/// standard error of the mean across runs, `√(Σ σᵣ²) / R`.
pub fn bootstrap_error<F>(n_records: usize, runs: usize, estimator: F, n_boot: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[usize]) -> Result<f64>,
{
    if n_boot < 2 {
        return Err(Error::InvalidParameter("n_boot must be >= 2".into()));
    }
    if runs == 0 || !n_records.is_multiple_of(runs) || n_records == 0 {
        return Err(Error::InvalidParameter(format!(
            "{n_records} records do not split into {runs} runs"
        )));
    }
    let size = n_records / runs;
    let mut var_sum = 0.0;
    let mut sample = vec![0usize; size];
    for run in 0..runs {
        let base = run * size;
        let mut values = Vec::with_capacity(n_boot);
        for b in 0..n_boot {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((run as u64) << 32) | b as u64);
            for s in sample.iter_mut() {
                *s = base + rng.random_range(0..size);
            }
            values.push(estimator(&sample)?);
        }
        let mean = values.iter().sum::<f64>() / n_boot as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_boot as f64 - 1.0);
        var_sum += var;
    }
    Ok(var_sum.sqrt() / runs as f64)
}
