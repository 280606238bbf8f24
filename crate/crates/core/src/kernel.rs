// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Extreme singular values of dense complex blocks without a full SVD.
//!
//! One LU factorisation serves solves with both `M` and `M†`, so block
//! inverse iteration on `(M†M)⁻¹` costs `O(n²)` per sweep after the
//! `O(n³)` factorisation.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::qlinalg::{C64, ZERO};

pub(crate) struct Factor {
    lu: LU<C64, Dyn, Dyn>,
    u_adj: DMatrix<C64>,
    l_adj: DMatrix<C64>,
    singular: bool,
}

impl Factor {
    pub(crate) fn new(m: DMatrix<C64>) -> Self {
        let lu = m.lu();
        let u = lu.u();
        let singular = u.diagonal().iter().any(|z| *z == ZERO);
        let u_adj = u.adjoint();
        let l_adj = lu.l().adjoint();
        Self {
            lu,
            u_adj,
            l_adj,
            singular,
        }
    }

    pub(crate) fn is_singular(&self) -> bool {
        self.singular
    }

    fn solve(&self, x: &mut DVector<C64>) {
        let ok = self.lu.solve_mut(x);
        debug_assert!(ok);
    }

    /// `P M = L U`, so `M† = U† L† P` and `M† y = x` unwinds in three steps.
    fn solve_adjoint(&self, x: &mut DVector<C64>) {
        let ok = self.u_adj.solve_lower_triangular_mut(x);
        debug_assert!(ok);
        let ok = self.l_adj.solve_upper_triangular_mut(x);
        debug_assert!(ok);
        self.lu.p().inv_permute_rows(x);
    }
}

/// Deterministic, well-spread start block.
fn start_block(n: usize, p: usize) -> DMatrix<C64> {
    DMatrix::from_fn(n, p, |i, j| {
        let t = (i as f64 + 1.0) * (0.618_033_988_749_894_9 + 0.414_213_562_373_095 * j as f64);
        C64::new((t * 12.9898).sin(), (t * 78.233).cos())
    })
}

fn orthonormalize(x: DMatrix<C64>) -> DMatrix<C64> {
    x.qr().q()
}

/// Largest singular value by power iteration on `M†M`.
pub(crate) fn largest_singular(m: &DMatrix<C64>, iters: usize) -> f64 {
    let mut v = start_block(m.ncols(), 1).column(0).into_owned();
    v /= C64::new(v.norm(), 0.0);
    let mut sigma = 0.0;
    for _ in 0..iters {
        let w = m * &v;
        sigma = w.norm();
        let mut z = m.adjoint() * w;
        let nz = z.norm();
        if nz == 0.0 {
            return 0.0;
        }
        z /= C64::new(nz, 0.0);
        v = z;
    }
    sigma
}

pub(crate) struct SmallSingular {
    /// Ascending.
    pub values: Vec<f64>,
    /// Right singular vectors, unit norm.
    pub vectors: Vec<DVector<C64>>,
}

/// The `count` smallest singular triplets of `m` via block inverse iteration
/// with a factorisation of `m − shift·I`, finished by a Rayleigh–Ritz step
/// on the unshifted matrix. Returns `None` for an exactly singular pivot.
pub(crate) fn smallest_singular(m: &DMatrix<C64>, shift: f64, count: usize, iters: usize) -> Option<SmallSingular> {
    let n = m.nrows();
    let p = (count + 2).min(n);
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] -= C64::new(shift, 0.0);
    }
    let f = Factor::new(shifted);
    if f.is_singular() {
        return None;
    }
    let mut x = orthonormalize(start_block(n, p));
    for _ in 0..iters {
        for j in 0..p {
            let mut col = x.column(j).into_owned();
            f.solve_adjoint(&mut col);
            f.solve(&mut col);
            x.set_column(j, &col);
        }
        x = orthonormalize(x);
    }
    let y = m * &x;
    let gram = y.adjoint() * &y;
    let gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let take = count.min(p);
    let values = order[..take]
        .iter()
        .map(|&k| eig.eigenvalues[k].max(0.0).sqrt())
        .collect();
    let vectors = order[..take]
        .iter()
        .map(|&k| {
            let v = &x * eig.eigenvectors.column(k);
            let nv = v.norm();
            v / C64::new(nv, 0.0)
        })
        .collect();
    Some(SmallSingular { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::ONE;

    fn sample(n: usize) -> DMatrix<C64> {
        DMatrix::from_fn(n, n, |i, j| {
            let t = (i * i * 7 + j * 13 + i * j * 3 + j * j * 5) as f64;
            C64::new((t * 0.37).sin(), (t * 0.11).cos())
        })
    }

    #[test]
    fn adjoint_solve_inverts_adjoint() {
        let m = sample(9);
        let f = Factor::new(m.clone());
        let b = start_block(9, 1).column(0).into_owned();
        let mut x = b.clone();
        f.solve_adjoint(&mut x);
        assert!((m.adjoint() * x - b).norm() < 1e-10);
    }

    #[test]
    fn matches_full_svd() {
        let m = sample(40);
        let mut reference: Vec<f64> = m.clone().singular_values().iter().copied().collect();
        reference.sort_by(|a, b| a.total_cmp(b));
        let s = smallest_singular(&m, 0.0, 2, 60).unwrap();
        for k in 0..2 {
            assert!((s.values[k] - reference[k]).abs() < 1e-8 * reference[39]);
        }
        let big = largest_singular(&m, 200);
        assert!((big - reference[39]).abs() < 1e-6 * reference[39]);
    }

    #[test]
    fn singular_pivot_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[-ONE, ONE, ONE, -ONE]);
        assert!(Factor::new(m).is_singular());
    }
}
