// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex operators on ordered tensor-product spaces.
//!
//! Index ordering is big-endian over the layout: the first label is the most
//! significant digit of a basis index. Models place all qubits first, then
//! all resonators.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Ordered list of subsystems with their dimensions and unique labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceLayout {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SpaceLayout {
    pub fn new<S: Into<String>>(dims: Vec<usize>, labels: Vec<S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if dims.is_empty() {
            return Err(Error::InvalidLayout("no subsystems".into()));
        }
        if dims.len() != labels.len() {
            return Err(Error::InvalidLayout(format!(
                "{} dims but {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if let Some(d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidLayout(format!("subsystem dimension {d} < 2")));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidLayout(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { dims, labels })
    }

    /// A single subsystem, used for local operators.
    pub fn single(dim: usize, label: &str) -> Self {
        Self::new(vec![dim], vec![label]).expect("single-site layout")
    }

    /// `n` two-level systems labelled `Q1..Qn`.
    pub fn qubits(n: usize) -> Self {
        let labels: Vec<String> = (1..=n).map(|i| format!("Q{i}")).collect();
        Self::new(vec![2; n], labels).expect("qubit layout")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Concatenation `self ⊗ other`.
    pub fn tensor(&self, other: &SpaceLayout) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Self::new(dims, labels)
    }

    /// Split a flat index into per-subsystem digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.dims).fold(0, |acc, (&x, &d)| acc * d + x)
    }
}

/// Dense square complex matrix acting on a [`SpaceLayout`], row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorMatrix {
    layout: SpaceLayout,
    data: Vec<C64>,
}

impl fmt::Debug for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.dim();
        writeln!(f, "OperatorMatrix {:?} {{", self.layout.labels)?;
        for i in 0..d {
            write!(f, "  ")?;
            for j in 0..d {
                let z = self.get(i, j);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "}}")
    }
}

impl OperatorMatrix {
    pub fn zeros(layout: &SpaceLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout: layout.clone(),
            data: vec![ZERO; d * d],
        }
    }

    pub fn identity(layout: &SpaceLayout) -> Self {
        let mut m = Self::zeros(layout);
        for i in 0..m.dim() {
            m.set(i, i, ONE);
        }
        m
    }

    pub fn from_fn(layout: &SpaceLayout, f: impl Fn(usize, usize) -> C64) -> Self {
        let d = layout.total_dim();
        let data = (0..d * d).map(|k| f(k / d, k % d)).collect();
        Self {
            layout: layout.clone(),
            data,
        }
    }

    pub fn from_data(layout: &SpaceLayout, data: Vec<C64>) -> Result<Self> {
        let d = layout.total_dim();
        if data.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: data.len(),
            });
        }
        Ok(Self {
            layout: layout.clone(),
            data,
        })
    }

    pub fn from_real_rows(layout: &SpaceLayout, rows: &[&[f64]]) -> Result<Self> {
        let d = layout.total_dim();
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rows.len(),
            });
        }
        Ok(Self::from_fn(layout, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn diagonal(layout: &SpaceLayout, diag: &[C64]) -> Result<Self> {
        let d = layout.total_dim();
        if diag.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: diag.len(),
            });
        }
        let mut m = Self::zeros(layout);
        for (i, &z) in diag.iter().enumerate() {
            m.set(i, i, z);
        }
        Ok(m)
    }

    /// `|a><b|`.
    pub fn outer(layout: &SpaceLayout, ket: &[C64], bra: &[C64]) -> Result<Self> {
        let d = layout.total_dim();
        if ket.len() != d || bra.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: ket.len().max(bra.len()),
            });
        }
        Ok(Self::from_fn(layout, |i, j| ket[i] * bra[j].conj()))
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim() + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        let d = self.dim();
        self.data[i * d + j] = z;
    }

    /// Same entries viewed on a different layout of equal total dimension.
    pub fn with_layout(&self, layout: &SpaceLayout) -> Result<Self> {
        if layout.total_dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: layout.total_dim(),
            });
        }
        Ok(Self {
            layout: layout.clone(),
            data: self.data.clone(),
        })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let d = self.dim();
        let mut out = vec![ZERO; d * d];
        for i in 0..d {
            let row = &mut out[i * d..(i + 1) * d];
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * d..(k + 1) * d];
                for (o, &b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            layout: self.layout.clone(),
            data: out,
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        Self {
            layout: self.layout.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            layout: self.layout.clone(),
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim();
        Self::from_fn(&self.layout, |i, j| self.data[j * d + i].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// `A ⊗ B` on the concatenated layout.
    pub fn kron(&self, other: &Self) -> Result<Self> {
        let layout = self.layout.tensor(&other.layout)?;
        let (da, db) = (self.dim(), other.dim());
        let d = da * db;
        let mut data = vec![ZERO; d * d];
        for i in 0..da {
            for j in 0..da {
                let a = self.data[i * da + j];
                if a == ZERO {
                    continue;
                }
                for k in 0..db {
                    for l in 0..db {
                        data[(i * db + k) * d + j * db + l] = a * other.data[k * db + l];
                    }
                }
            }
        }
        Ok(Self { layout, data })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.try_sub(&other.matmul(self)?)
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let d = self.dim();
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        Ok((0..d)
            .map(|i| self.data[i * d..(i + 1) * d].iter().zip(v).map(|(&a, &x)| a * x).sum())
            .collect())
    }

    /// `<u|A|v>`.
    pub fn sandwich(&self, u: &[C64], v: &[C64]) -> Result<C64> {
        let av = self.apply(v)?;
        Ok(u.iter().zip(&av).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest elementwise `|A - A^dag|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn hermitian_part(&self) -> Self {
        let d = self.dim();
        Self::from_fn(&self.layout, |i, j| {
            (self.data[i * d + j] + self.data[j * d + i].conj()) * 0.5
        })
    }

    pub fn commutes_with(&self, other: &Self, tol: f64) -> Result<bool> {
        Ok(self.commutator(other)?.max_abs() <= tol)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.data)
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: Self) -> OperatorMatrix {
        self.try_add(rhs).expect("operator dimensions must agree")
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: Self) -> OperatorMatrix {
        self.try_sub(rhs).expect("operator dimensions must agree")
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: Self) -> OperatorMatrix {
        self.matmul(rhs).expect("operator dimensions must agree")
    }
}

// Local operators on a single subsystem.

pub fn identity(dim: usize) -> OperatorMatrix {
    OperatorMatrix::identity(&SpaceLayout::single(dim, "local"))
}

/// Truncated bosonic lowering operator; for `dim == 2` this is `|0><1|`.
pub fn annihilation(dim: usize) -> OperatorMatrix {
    let layout = SpaceLayout::single(dim, "local");
    OperatorMatrix::from_fn(&layout, |i, j| {
        if j == i + 1 {
            C64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

pub fn creation(dim: usize) -> OperatorMatrix {
    annihilation(dim).adjoint()
}

pub fn number(dim: usize) -> OperatorMatrix {
    let layout = SpaceLayout::single(dim, "local");
    OperatorMatrix::from_fn(&layout, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO })
}

pub fn pauli_x() -> OperatorMatrix {
    OperatorMatrix::from_data(&SpaceLayout::single(2, "local"), vec![ZERO, ONE, ONE, ZERO]).expect("2x2")
}

pub fn pauli_y() -> OperatorMatrix {
    OperatorMatrix::from_data(&SpaceLayout::single(2, "local"), vec![ZERO, -I, I, ZERO]).expect("2x2")
}

pub fn pauli_z() -> OperatorMatrix {
    OperatorMatrix::from_data(&SpaceLayout::single(2, "local"), vec![ONE, ZERO, ZERO, -ONE]).expect("2x2")
}

/// Computational basis vector `|index>` of dimension `dim`.
pub fn basis_ket(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    v[index] = ONE;
    v
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// `Id ⊗ … ⊗ local_op ⊗ … ⊗ Id` with `local_op` at `site`.
pub fn embed(local_op: &OperatorMatrix, site: &str, layout: &SpaceLayout) -> Result<OperatorMatrix> {
    let pos = layout.position(site)?;
    let dims = layout.dims();
    if local_op.dim() != dims[pos] {
        return Err(Error::DimensionMismatch {
            expected: dims[pos],
            found: local_op.dim(),
        });
    }
    let left: usize = dims[..pos].iter().product();
    let right: usize = dims[pos + 1..].iter().product();
    let dl = dims[pos];
    let d = layout.total_dim();
    let mut out = OperatorMatrix::zeros(layout);
    for l in 0..left {
        for a in 0..dl {
            for b in 0..dl {
                let z = local_op.get(a, b);
                if z == ZERO {
                    continue;
                }
                for r in 0..right {
                    let row = (l * dl + a) * right + r;
                    let col = (l * dl + b) * right + r;
                    out.data[row * d + col] = z;
                }
            }
        }
    }
    Ok(out)
}

/// Operator acting on a contiguous-or-not subset of sites, given on the
/// tensor product of those sites in layout order, extended by identities.
pub fn embed_multi(op: &OperatorMatrix, sites: &[&str], layout: &SpaceLayout) -> Result<OperatorMatrix> {
    let positions: Vec<usize> = sites.iter().map(|s| layout.position(s)).collect::<Result<_>>()?;
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "sites must be distinct and in layout order".into(),
        ));
    }
    let sub_dims: Vec<usize> = positions.iter().map(|&p| layout.dims()[p]).collect();
    let sub = SpaceLayout::new(sub_dims, sites.to_vec())?;
    if op.dim() != sub.total_dim() {
        return Err(Error::DimensionMismatch {
            expected: sub.total_dim(),
            found: op.dim(),
        });
    }
    let d = layout.total_dim();
    let mut out = OperatorMatrix::zeros(layout);
    for row in 0..d {
        let rd = layout.digits(row);
        let rsub = sub.index(&positions.iter().map(|&p| rd[p]).collect::<Vec<_>>());
        for col in 0..d {
            let cd = layout.digits(col);
            let spectators_match = (0..layout.len())
                .filter(|k| !positions.contains(k))
                .all(|k| rd[k] == cd[k]);
            if !spectators_match {
                continue;
            }
            let csub = sub.index(&positions.iter().map(|&p| cd[p]).collect::<Vec<_>>());
            out.data[row * d + col] = op.get(rsub, csub);
        }
    }
    Ok(out)
}

/// Reduce `rho` onto the `keep` subsystems, retaining their layout order.
pub fn partial_trace(rho: &OperatorMatrix, keep: &[&str]) -> Result<OperatorMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidParameter("partial trace keeps no subsystem".into()));
    }
    let layout = rho.layout();
    let mut positions: Vec<usize> = keep.iter().map(|s| layout.position(s)).collect::<Result<_>>()?;
    positions.sort_unstable();
    positions.dedup();
    let kept = SpaceLayout::new(
        positions.iter().map(|&p| layout.dims()[p]).collect(),
        positions.iter().map(|&p| layout.labels()[p].clone()).collect(),
    )?;
    let traced: Vec<usize> = (0..layout.len()).filter(|k| !positions.contains(k)).collect();
    let traced_layout_dims: Vec<usize> = traced.iter().map(|&p| layout.dims()[p]).collect();
    let n_env: usize = traced_layout_dims.iter().product();
    let dk = kept.total_dim();
    let mut out = OperatorMatrix::zeros(&kept);

    // Full digits for (kept digits, env digits).
    let full_index = |kd: &[usize], ed: &[usize]| -> usize {
        let mut digits = vec![0; layout.len()];
        for (slot, &p) in positions.iter().enumerate() {
            digits[p] = kd[slot];
        }
        for (slot, &p) in traced.iter().enumerate() {
            digits[p] = ed[slot];
        }
        layout.index(&digits)
    };
    let env_digits = |mut e: usize| -> Vec<usize> {
        let mut ds = vec![0; traced_layout_dims.len()];
        for (slot, &d) in ds.iter_mut().zip(&traced_layout_dims).rev() {
            *slot = e % d;
            e /= d;
        }
        ds
    };
    let envs: Vec<Vec<usize>> = (0..n_env).map(env_digits).collect();
    let kdigits: Vec<Vec<usize>> = (0..dk).map(|k| kept.digits(k)).collect();
    let rows: Vec<Vec<usize>> = kdigits
        .iter()
        .map(|kd| envs.iter().map(|ed| full_index(kd, ed)).collect())
        .collect();
    for i in 0..dk {
        for j in 0..dk {
            let s: C64 = rows[i].iter().zip(&rows[j]).map(|(&a, &b)| rho.get(a, b)).sum();
            out.set(i, j, s);
        }
    }
    Ok(out)
}

/// Spectral decomposition of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// `vectors[k]` is the normalised eigenvector for `values[k]`.
    pub vectors: Vec<Vec<C64>>,
}

pub fn eig_hermitian(h: &OperatorMatrix) -> Result<Eigen> {
    let scale = h.max_abs().max(1.0);
    let herr = h.hermiticity_error();
    if herr > 1e-9 * scale {
        return Err(Error::NotHermitian(herr));
    }
    let d = h.dim();
    let m = h.hermitian_part().to_nalgebra();
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    Ok(Eigen { values, vectors })
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix(OperatorMatrix);

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-9;
    pub const POSITIVITY_TOL: f64 = 1e-8;

    /// Validates all invariants.
    pub fn new(op: OperatorMatrix) -> Result<Self> {
        Self::check(&op, Self::POSITIVITY_TOL)?;
        Ok(Self(op))
    }

    /// Validates with a caller-chosen positivity tolerance.
    pub fn with_positivity_tol(op: OperatorMatrix, tol: f64) -> Result<Self> {
        Self::check(&op, tol)?;
        Ok(Self(op))
    }

    pub(crate) fn new_unchecked(op: OperatorMatrix) -> Self {
        Self(op)
    }

    fn check(op: &OperatorMatrix, pos_tol: f64) -> Result<()> {
        let herr = op.hermiticity_error();
        if herr > Self::HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({herr:.3e})")));
        }
        let tr = op.trace();
        if (tr - ONE).norm() > Self::TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = eig_hermitian(op)?.values[0];
        if min < -pos_tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn pure(layout: &SpaceLayout, ket: &[C64]) -> Result<Self> {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("zero state vector".into()));
        }
        let psi: Vec<C64> = ket.iter().map(|z| z / norm).collect();
        Ok(Self(OperatorMatrix::outer(layout, &psi, &psi)?))
    }

    pub fn basis_state(layout: &SpaceLayout, index: usize) -> Result<Self> {
        let d = layout.total_dim();
        if index >= d {
            return Err(Error::InvalidParameter(format!("basis index {index} >= {d}")));
        }
        Self::pure(layout, &basis_ket(d, index))
    }

    pub fn maximally_mixed(layout: &SpaceLayout) -> Self {
        let d = layout.total_dim();
        Self(OperatorMatrix::identity(layout).scale_real(1.0 / d as f64))
    }

    /// Convex mixture `Σ w_k ρ_k`; weights must be non-negative and sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("mixture weights".into()));
        }
        let mut acc = OperatorMatrix::zeros(first.1.layout());
        for (w, rho) in parts {
            acc = acc.try_add(&rho.0.scale_real(*w))?;
        }
        Ok(Self(acc))
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        Ok(Self(self.0.kron(&other.0)?))
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        Ok(Self(partial_trace(&self.0, keep)?))
    }

    pub fn as_operator(&self) -> &OperatorMatrix {
        &self.0
    }

    pub fn into_operator(self) -> OperatorMatrix {
        self.0
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.0.layout()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0.get(i, j)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        eig_hermitian(&self.0).map(|e| e.values[0]).unwrap_or(f64::NAN)
    }

    /// `½ ||ρ - σ||₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        let diff = self.0.try_sub(&other.0)?;
        let e = eig_hermitian(&diff.hermitian_part())?;
        Ok(0.5 * e.values.iter().map(|v| v.abs()).sum::<f64>())
    }
}

/// `½ ||A - B||₁` for Hermitian operators that need not be states.
pub fn trace_distance(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<f64> {
    let e = eig_hermitian(&a.try_sub(b)?.hermitian_part())?;
    Ok(0.5 * e.values.iter().map(|v| v.abs()).sum::<f64>())
}

/// JSON form of a complex matrix with separate real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub labels: Vec<String>,
    pub dims: Vec<usize>,
    pub real: Vec<Vec<f64>>,
    pub imag: Vec<Vec<f64>>,
}

impl From<&OperatorMatrix> for MatrixJson {
    fn from(op: &OperatorMatrix) -> Self {
        let d = op.dim();
        let rows = |f: fn(C64) -> f64| (0..d).map(|i| (0..d).map(|j| f(op.get(i, j))).collect()).collect();
        Self {
            labels: op.layout().labels().to_vec(),
            dims: op.layout().dims().to_vec(),
            real: rows(|z| z.re),
            imag: rows(|z| z.im),
        }
    }
}

impl MatrixJson {
    pub fn to_operator(&self) -> Result<OperatorMatrix> {
        let layout = SpaceLayout::new(self.dims.clone(), self.labels.clone())?;
        let d = layout.total_dim();
        if self.real.len() != d || self.imag.len() != d || self.real.iter().chain(&self.imag).any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: self.real.len(),
            });
        }
        Ok(OperatorMatrix::from_fn(&layout, |i, j| {
            C64::new(self.real[i][j], self.imag[i][j])
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn layout_rejects_bad_input() {
        assert!(SpaceLayout::new(Vec::<usize>::new(), Vec::<String>::new()).is_err());
        assert!(SpaceLayout::new(vec![2, 2], vec!["A", "A"]).is_err());
        assert!(SpaceLayout::new(vec![2], vec!["A", "B"]).is_err());
        assert!(SpaceLayout::new(vec![1], vec!["A"]).is_err());
        let l = SpaceLayout::new(vec![2, 3], vec!["Q1", "R1"]).unwrap();
        assert_eq!(l.total_dim(), 6);
        assert_eq!(l.digits(4), vec![1, 1]);
        assert_eq!(l.index(&[1, 2]), 5);
    }

    #[test]
    fn embed_identity_is_identity() {
        let l = SpaceLayout::qubits(2);
        let e = embed(&identity(2), "Q1", &l).unwrap();
        assert_eq!(e, OperatorMatrix::identity(&l));
    }

    #[test]
    fn embed_lowering_on_second_qubit() {
        let l = SpaceLayout::qubits(2);
        let e = embed(&annihilation(2), "Q2", &l).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i, j) == (0, 1) || (i, j) == (2, 3) { 1.0 } else { 0.0 };
                assert_eq!(e.get(i, j), c(expect), "({i},{j})");
            }
        }
    }

    #[test]
    fn embed_number_on_resonator() {
        let l = SpaceLayout::new(vec![2, 3], vec!["Q1", "R1"]).unwrap();
        let n = embed(&number(3), "R1", &l).unwrap();
        // |e,2> has index 1*3 + 2.
        let v = basis_ket(6, 5);
        let nv = n.apply(&v).unwrap();
        assert_abs_diff_eq!(nv[5].re, 2.0);
        assert!(nv.iter().enumerate().all(|(k, z)| k == 5 || z.norm() == 0.0));
    }

    #[test]
    fn embed_errors() {
        let l = SpaceLayout::qubits(2);
        assert!(matches!(embed(&identity(2), "Q9", &l), Err(Error::UnknownLabel(_))));
        assert!(matches!(
            embed(&identity(3), "Q1", &l),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let l = SpaceLayout::qubits(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = [c(s), ZERO, ZERO, c(s)];
        let rho = DensityMatrix::pure(&l, &phi).unwrap();
        let red = rho.partial_trace(&["Q1"]).unwrap();
        let expect = identity(2).scale_real(0.5);
        assert!(red.as_operator().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn partial_trace_keeps_qubits_over_vacuum() {
        let ql = SpaceLayout::qubits(2);
        let rho_q = DensityMatrix::pure(&ql, &[c(0.6), c(0.8), ZERO, ZERO]).unwrap();
        let vac = DensityMatrix::basis_state(&SpaceLayout::single(4, "R1"), 0).unwrap();
        let full = rho_q.tensor(&vac).unwrap();
        let red = full.partial_trace(&["Q1", "Q2"]).unwrap();
        assert!(red.as_operator().max_abs_diff(rho_q.as_operator()) < 1e-15);
        assert!(partial_trace(full.as_operator(), &[]).is_err());
    }

    #[test]
    fn partial_trace_middle_subsystem() {
        // Keep the middle factor of A ⊗ B ⊗ C.
        let a = DensityMatrix::basis_state(&SpaceLayout::single(2, "A"), 1).unwrap();
        let b = DensityMatrix::pure(&SpaceLayout::single(3, "B"), &[c(1.0), c(1.0), c(1.0)]).unwrap();
        let cc = DensityMatrix::maximally_mixed(&SpaceLayout::single(2, "C"));
        let full = a.tensor(&b).unwrap().tensor(&cc).unwrap();
        let red = full.partial_trace(&["B"]).unwrap();
        assert!(red.as_operator().max_abs_diff(b.as_operator()) < 1e-15);
    }

    #[test]
    fn eig_pauli_x() {
        let e = eig_hermitian(&pauli_x()).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
        let v = &e.vectors[0];
        // (|0> - |1>)/√2 up to global phase.
        assert_abs_diff_eq!((v[0] + v[1]).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[0].norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn eig_zero_and_non_hermitian() {
        let z = OperatorMatrix::zeros(&SpaceLayout::qubits(2));
        assert!(eig_hermitian(&z).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(matches!(eig_hermitian(&annihilation(3)), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn density_matrix_validation() {
        let l = SpaceLayout::qubits(1);
        assert!(DensityMatrix::new(pauli_z()).is_err());
        let bad = OperatorMatrix::diagonal(&l, &[c(1.2), c(-0.2)]).unwrap();
        assert!(DensityMatrix::new(bad).is_err());
        let ok = OperatorMatrix::diagonal(&l, &[c(0.3), c(0.7)]).unwrap();
        assert!(DensityMatrix::new(ok).is_ok());
    }
}
