// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Lindblad master-equation integration and steady-state solvers.
//!
//! The generator `dρ/dt = -i[H(t), ρ] + Σ_m D[L_m]ρ` is assembled once as a
//! sparse superoperator acting on row-major `vec(ρ)`, where
//! `H(t) = H_static + Σ_k (V_k e^{-iω_k t} + h.c.)`. The same generator serves
//! time integration and the null-space solve.
//!
//! Symmetries of the model (parity, conserved charges) make the generator
//! block diagonal in the matrix-unit basis. Both solvers work on the
//! connected block that carries the state, which is exact and much smaller
//! than `d² × d²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{largest_singular, smallest_singular};
use crate::qlinalg::{eig_hermitian, DensityMatrix, OperatorMatrix, SpaceLayout, C64, I, ONE, ZERO};

#[derive(Clone, Debug)]
pub struct JumpOperator {
    pub label: String,
    /// Prefactor `√rate` already absorbed.
    pub operator: OperatorMatrix,
}

/// Contributes `operator · e^{-iωt} + h.c.` to the Hamiltonian.
#[derive(Clone, Debug)]
pub struct OscillatingTerm {
    pub operator: OperatorMatrix,
    pub frequency: f64,
}

/// Hamiltonian plus weighted jump operators: a complete open-system model.
#[derive(Clone, Debug)]
pub struct LiouvillianModel {
    hamiltonian: OperatorMatrix,
    oscillating: Vec<OscillatingTerm>,
    jumps: Vec<JumpOperator>,
}

impl LiouvillianModel {
    pub fn new(
        hamiltonian: OperatorMatrix,
        oscillating: Vec<OscillatingTerm>,
        jumps: Vec<JumpOperator>,
    ) -> Result<Self> {
        let herr = hamiltonian.hermiticity_error();
        if herr > 1e-10 * hamiltonian.max_abs().max(1.0) {
            return Err(Error::NotHermitian(herr));
        }
        let layout = hamiltonian.layout();
        let same = |op: &OperatorMatrix| op.layout() == layout;
        if !oscillating.iter().all(|t| same(&t.operator)) || !jumps.iter().all(|j| same(&j.operator)) {
            return Err(Error::InvalidLayout("operators do not share one layout".into()));
        }
        Ok(Self {
            hamiltonian,
            oscillating,
            jumps,
        })
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    pub fn oscillating_terms(&self) -> &[OscillatingTerm] {
        &self.oscillating
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.hamiltonian.layout()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn is_static(&self) -> bool {
        self.oscillating.is_empty()
    }

    pub fn hamiltonian_at(&self, t: f64) -> OperatorMatrix {
        let mut h = self.hamiltonian.clone();
        for term in &self.oscillating {
            let phase = C64::from_polar(1.0, -term.frequency * t);
            let v = term.operator.scale(phase);
            h = &(&h + &v) + &v.adjoint();
        }
        h
    }

    /// Largest angular frequency the integrator has to resolve.
    pub fn max_frequency(&self) -> Result<f64> {
        let spectral = |op: &OperatorMatrix| -> Result<f64> {
            let e = eig_hermitian(&op.hermitian_part())?;
            Ok(e.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        };
        let mut coherent = spectral(&self.hamiltonian)?;
        for term in &self.oscillating {
            let vv = &term.operator.adjoint() * &term.operator;
            coherent += 2.0 * spectral(&vv)?.sqrt();
        }
        let mut decay = OperatorMatrix::zeros(self.layout());
        for j in &self.jumps {
            decay = &decay + &(&j.operator.adjoint() * &j.operator);
        }
        let decay = 0.5 * spectral(&decay)?;
        let drive = self.oscillating.iter().fold(0.0_f64, |m, t| m.max(t.frequency.abs()));
        Ok(coherent.max(decay).max(drive))
    }

    pub fn generator(&self) -> Generator {
        Generator::new(self)
    }
}

/// `D[L]ρ = LρL† − ½{L†L, ρ}`.
pub fn dissipator(l: &OperatorMatrix, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
    let ld = l.adjoint();
    let ldl = ld.matmul(l)?;
    let sandwich = l.matmul(rho)?.matmul(&ld)?;
    let anti = &ldl.matmul(rho)? + &rho.matmul(&ldl)?;
    Ok(&sandwich - &anti.scale_real(0.5))
}

/// Dense evaluation of the full right-hand side at time `t`.
pub fn lindblad_rhs(model: &LiouvillianModel, rho: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    let h = model.hamiltonian_at(t);
    let mut out = h.commutator(rho)?.scale(-I);
    for j in &model.jumps {
        out = &out + &dissipator(&j.operator, rho)?;
    }
    Ok(out)
}

/// Compressed-row sparse matrix over `vec(ρ)` indices.
#[derive(Clone, Debug)]
pub struct SparseSuper {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl SparseSuper {
    fn from_triplets(n: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
            } else {
                cols.push(c as u32);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        // Drop exact cancellations.
        let mut out = Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        };
        for r in 0..n {
            for k in row_ptr[r]..row_ptr[r + 1] {
                if vals[k] != ZERO {
                    out.cols.push(cols[k]);
                    out.vals.push(vals[k]);
                }
            }
            out.row_ptr[r + 1] = out.cols.len();
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y += s · A x`.
    #[inline]
    fn mul_add(&self, x: &[C64], s: C64, y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yr += s * acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.n];
        self.mul_add(x, ONE, &mut y);
        y
    }

    fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k] as usize, self.vals[k]))
        })
    }

    /// Sub-block on `indices`, which must be a union of invariant blocks.
    fn restrict(&self, indices: &[usize], position: &[usize]) -> Self {
        let trip = indices
            .iter()
            .enumerate()
            .flat_map(|(new_r, &r)| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(move |k| (new_r, position[self.cols[k] as usize], self.vals[k]))
            })
            .collect();
        Self::from_triplets(indices.len(), trip)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }
}

fn nonzeros(op: &OperatorMatrix) -> Vec<(usize, usize, C64)> {
    let d = op.dim();
    op.data()
        .iter()
        .enumerate()
        .filter(|(_, z)| **z != ZERO)
        .map(|(k, &z)| (k / d, k % d, z))
        .collect()
}

/// `A·ρ`.
fn push_left(trip: &mut Vec<(usize, usize, C64)>, a: &OperatorMatrix, scale: C64) {
    let d = a.dim();
    for (i, k, z) in nonzeros(a) {
        for j in 0..d {
            trip.push((i * d + j, k * d + j, scale * z));
        }
    }
}

/// `ρ·B`.
fn push_right(trip: &mut Vec<(usize, usize, C64)>, b: &OperatorMatrix, scale: C64) {
    let d = b.dim();
    for (k, j, z) in nonzeros(b) {
        for i in 0..d {
            trip.push((i * d + j, i * d + k, scale * z));
        }
    }
}

/// `L·ρ·L†`.
fn push_sandwich(trip: &mut Vec<(usize, usize, C64)>, l: &OperatorMatrix) {
    let d = l.dim();
    let nz = nonzeros(l);
    for &(i, k, a) in &nz {
        for &(j, m, b) in &nz {
            trip.push((i * d + j, k * d + m, a * b.conj()));
        }
    }
}

/// The vectorised generator `L(t) = L₀ + Σ_k (e^{-iω_k t} A_k + e^{iω_k t} B_k)`.
#[derive(Clone, Debug)]
pub struct Generator {
    dim: usize,
    constant: SparseSuper,
    harmonics: Vec<(f64, SparseSuper, SparseSuper)>,
}

impl Generator {
    pub fn new(model: &LiouvillianModel) -> Self {
        let d = model.dim();
        let n = d * d;
        let mut heff = model.hamiltonian.clone();
        let mut trip = Vec::new();
        for j in &model.jumps {
            let ldl = &j.operator.adjoint() * &j.operator;
            heff = &heff - &ldl.scale(I * 0.5);
            push_sandwich(&mut trip, &j.operator);
        }
        push_left(&mut trip, &heff, -I);
        push_right(&mut trip, &heff.adjoint(), I);
        let constant = SparseSuper::from_triplets(n, trip);

        let harmonics = model
            .oscillating
            .iter()
            .map(|term| {
                let v = &term.operator;
                let vd = v.adjoint();
                let mut a = Vec::new();
                push_left(&mut a, v, -I);
                push_right(&mut a, v, I);
                let mut b = Vec::new();
                push_left(&mut b, &vd, -I);
                push_right(&mut b, &vd, I);
                (
                    term.frequency,
                    SparseSuper::from_triplets(n, a),
                    SparseSuper::from_triplets(n, b),
                )
            })
            .collect();
        Self {
            dim: d,
            constant,
            harmonics,
        }
    }

    /// Hilbert-space dimension `d` (the generator acts on `d²` entries).
    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn constant_part(&self) -> &SparseSuper {
        &self.constant
    }

    pub fn is_static(&self) -> bool {
        self.harmonics.is_empty()
    }

    pub fn apply(&self, x: &[C64], t: f64, y: &mut [C64]) {
        y.iter_mut().for_each(|z| *z = ZERO);
        self.constant.mul_add(x, ONE, y);
        for (w, a, b) in &self.harmonics {
            let ph = C64::from_polar(1.0, -w * t);
            a.mul_add(x, ph, y);
            b.mul_add(x, ph.conj(), y);
        }
    }

    /// Invariant blocks of `vec(ρ)` indices, from the union sparsity pattern.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.constant.n;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut union = |r: usize, c: usize| {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        };
        let mut link = |s: &SparseSuper| {
            for (r, c, _) in s.entries() {
                union(r, c);
            }
        };
        link(&self.constant);
        for (_, a, b) in &self.harmonics {
            link(a);
            link(b);
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..n {
            let root = find(&mut parent, k);
            groups.entry(root).or_default().push(k);
        }
        groups.into_values().collect()
    }

    /// Restriction to the blocks touching any index in `seed`.
    fn sector(&self, seed: &[usize]) -> Sector {
        let comps = self.components();
        let n = self.constant.n;
        let mut marked = vec![false; n];
        for &s in seed {
            marked[s] = true;
        }
        let mut indices: Vec<usize> = comps
            .into_iter()
            .filter(|c| c.iter().any(|&k| marked[k]))
            .flatten()
            .collect();
        indices.sort_unstable();
        let mut position = vec![usize::MAX; n];
        for (p, &k) in indices.iter().enumerate() {
            position[k] = p;
        }
        let generator = Generator {
            dim: self.dim,
            constant: self.constant.restrict(&indices, &position),
            harmonics: self
                .harmonics
                .iter()
                .map(|(w, a, b)| (*w, a.restrict(&indices, &position), b.restrict(&indices, &position)))
                .collect(),
        };
        Sector { indices, generator }
    }
}

struct Sector {
    indices: Vec<usize>,
    generator: Generator,
}

impl Sector {
    fn gather(&self, full: &[C64]) -> Vec<C64> {
        self.indices.iter().map(|&k| full[k]).collect()
    }

    fn scatter(&self, sub: &[C64], layout: &SpaceLayout) -> OperatorMatrix {
        let mut m = OperatorMatrix::zeros(layout);
        let data = m.data_mut();
        for (&k, &z) in self.indices.iter().zip(sub) {
            data[k] = z;
        }
        m
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Upper bound on the RK4 step (seconds).
    pub dt_max: f64,
    /// Record every `record_stride` steps (plus the initial and final state).
    pub record_stride: usize,
    /// Steps per period of the fastest model frequency.
    pub steps_per_period: f64,
    /// Refuse runs needing more steps than this.
    pub max_steps: u64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt_max: 0.5e-9,
            record_stride: 200,
            steps_per_period: 50.0,
            max_steps: 20_000_000,
        }
    }
}

impl EvolveOptions {
    /// Step bound for `model`: `min(dt_max, 2π / (steps_per_period · ω_max))`.
    pub fn step_for(&self, model: &LiouvillianModel) -> Result<f64> {
        let w = model.max_frequency()?;
        let resolved = if w > 0.0 {
            2.0 * std::f64::consts::PI / (w * self.steps_per_period)
        } else {
            f64::INFINITY
        };
        Ok(self.dt_max.min(resolved))
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub final_state: DensityMatrix,
    pub dt: f64,
    pub steps: u64,
    pub max_trace_drift: f64,
}

/// Allowed `|Tr ρ(t) − 1|` over a run.
pub const TRACE_DRIFT_TOL: f64 = 1e-7;

struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![ZERO; n],
            k2: vec![ZERO; n],
            k3: vec![ZERO; n],
            k4: vec![ZERO; n],
            tmp: vec![ZERO; n],
        }
    }

    fn step(&mut self, g: &Generator, x: &mut [C64], t: f64, dt: f64) {
        let h2 = dt * 0.5;
        g.apply(x, t, &mut self.k1);
        for ((o, &a), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k1) {
            *o = a + k * h2;
        }
        g.apply(&self.tmp, t + h2, &mut self.k2);
        for ((o, &a), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k2) {
            *o = a + k * h2;
        }
        g.apply(&self.tmp, t + h2, &mut self.k3);
        for ((o, &a), &k) in self.tmp.iter_mut().zip(x.iter()).zip(&self.k3) {
            *o = a + k * dt;
        }
        g.apply(&self.tmp, t + dt, &mut self.k4);
        let h6 = dt / 6.0;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * h6;
        }
    }
}

fn support(op: &OperatorMatrix) -> Vec<usize> {
    op.data()
        .iter()
        .enumerate()
        .filter(|(_, z)| **z != ZERO)
        .map(|(k, _)| k)
        .collect()
}

fn trace_of(sector: &Sector, x: &[C64], d: usize) -> C64 {
    sector
        .indices
        .iter()
        .zip(x)
        .filter(|(&k, _)| k / d == k % d)
        .map(|(_, &z)| z)
        .sum()
}

/// Fixed-step RK4 integration of the master equation from `rho0` to `t_final`.
pub fn evolve(
    model: &LiouvillianModel,
    rho0: &DensityMatrix,
    t_final: f64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    if rho0.layout() != model.layout() {
        return Err(Error::InvalidLayout("initial state layout differs from model".into()));
    }
    if !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!("t_final = {t_final} must be positive")));
    }
    if opts.record_stride == 0 {
        return Err(Error::InvalidParameter("record_stride must be >= 1".into()));
    }
    let dt_target = opts.step_for(model)?;
    // The slack keeps an exact multiple of the step from rounding up.
    let required = ((t_final / dt_target) * (1.0 - 1e-12)).ceil() as u64;
    if required > opts.max_steps {
        return Err(Error::StepBudgetExceeded {
            required,
            budget: opts.max_steps,
        });
    }
    let steps = required.max(1);
    let dt = t_final / steps as f64;

    let d = model.dim();
    let layout = model.layout().clone();
    let sector = model.generator().sector(&support(rho0.as_operator()));
    let g = &sector.generator;
    let mut x = sector.gather(rho0.as_operator().data());
    let mut rk = Rk4::new(x.len());

    let mut times = vec![0.0];
    let mut states = vec![rho0.clone()];
    let mut drift: f64 = 0.0;
    let mut record = |x: &[C64], t: f64, times: &mut Vec<f64>, states: &mut Vec<DensityMatrix>| -> Result<()> {
        let dev = (trace_of(&sector, x, d) - ONE).norm();
        drift = drift.max(dev);
        if dev > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift(dev));
        }
        let m = sector.scatter(x, &layout).hermitian_part();
        times.push(t);
        states.push(DensityMatrix::new_unchecked(m));
        Ok(())
    };
    for s in 1..=steps {
        let t = (s - 1) as f64 * dt;
        rk.step(g, &mut x, t, dt);
        if s % opts.record_stride as u64 == 0 || s == steps {
            record(&x, s as f64 * dt, &mut times, &mut states)?;
        }
    }
    let final_state = states.last().expect("final record").clone();
    Ok(EvolutionResult {
        times,
        states,
        final_state,
        dt,
        steps,
        max_trace_drift: drift,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceGate {
    pub dt: f64,
    pub half_dt_trace_distance: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Re-runs `evolve` at half the step and compares final states.
pub fn dt_convergence_gate(
    model: &LiouvillianModel,
    rho0: &DensityMatrix,
    t_final: f64,
    opts: &EvolveOptions,
    reference: &EvolutionResult,
) -> Result<ConvergenceGate> {
    let halved = EvolveOptions {
        dt_max: reference.dt * 0.5,
        record_stride: usize::MAX,
        ..opts.clone()
    };
    let fine = evolve(model, rho0, t_final, &halved)?;
    let dist = fine.final_state.trace_distance(&reference.final_state)?;
    let tolerance = 1e-7;
    Ok(ConvergenceGate {
        dt: reference.dt,
        half_dt_trace_distance: dist,
        tolerance,
        passed: dist < tolerance,
    })
}

#[derive(Clone, Debug)]
pub struct SteadyStateReport {
    pub state: DensityMatrix,
    pub smallest_singular: f64,
    pub second_singular: f64,
    pub largest_singular: f64,
    /// `‖L ρ‖₂ / (σ_max ‖ρ‖₂)`.
    pub relative_residual: f64,
    pub block_dim: usize,
}

/// Null vector of the static Liouvillian via SVD.
pub fn steady_state(model: &LiouvillianModel) -> Result<DensityMatrix> {
    steady_state_report(model).map(|r| r.state)
}

pub fn steady_state_report(model: &LiouvillianModel) -> Result<SteadyStateReport> {
    if !model.is_static() {
        return Err(Error::TimeDependentModel);
    }
    let d = model.dim();
    let generator = model.generator();
    let diagonal: Vec<usize> = (0..d).map(|i| i * d + i).collect();
    let sector = generator.sector(&diagonal);
    let block = sector.generator.constant.to_dense();
    let n = block.nrows();

    let largest = largest_singular(&block, 60);
    if largest == 0.0 {
        return Err(Error::DegenerateKernel { second: 0.0, largest });
    }
    let small =
        smallest_singular(&block, 1e-13 * largest, 2, 8).ok_or(Error::DegenerateKernel { second: 0.0, largest })?;
    let smallest = small.values[0];
    let second = small.values.get(1).copied().unwrap_or(largest);
    if second <= 1e-10 * largest {
        return Err(Error::DegenerateKernel { second, largest });
    }
    check_coherence_blocks(&generator, &sector.indices, largest)?;

    let null: Vec<C64> = small.vectors[0].iter().copied().collect();
    let raw = sector.scatter(&null, model.layout()).hermitian_part();
    let tr = raw.trace();
    if tr.norm() < 1e-300 {
        return Err(Error::InvalidState("null vector has zero trace".into()));
    }
    let rho = raw.scale(ONE / tr).hermitian_part();

    let full = generator.constant.apply(rho.data());
    let res: f64 = full.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let rho_norm = rho.frobenius_norm();
    let relative_residual = res / (largest * rho_norm);
    if relative_residual > 1e-8 {
        return Err(Error::SteadyStateResidual {
            residual: relative_residual,
            allowed: 1e-8,
        });
    }
    let state = DensityMatrix::new(rho)?;
    Ok(SteadyStateReport {
        state,
        smallest_singular: smallest,
        second_singular: second,
        largest_singular: largest,
        relative_residual,
        block_dim: n,
    })
}

/// A null vector in a block without diagonal entries would be a stationary
/// coherence, i.e. a second steady state.
fn check_coherence_blocks(generator: &Generator, covered: &[usize], largest: f64) -> Result<()> {
    let n = generator.constant.n;
    let d = generator.dim;
    let mirror = |k: usize| (k % d) * d + k / d;
    let mut taken = vec![false; n];
    for &k in covered {
        taken[k] = true;
    }
    for comp in generator.components() {
        // L(ρ†) = L(ρ)†, so a block and its transposed twin share singular values.
        let twin_min = comp.iter().map(|&k| mirror(k)).min().unwrap_or(usize::MAX);
        if taken[comp[0]] || twin_min < comp[0] {
            continue;
        }
        let mut position = vec![usize::MAX; n];
        for (p, &k) in comp.iter().enumerate() {
            position[k] = p;
        }
        let block = generator.constant.restrict(&comp, &position).to_dense();
        let min = smallest_singular(&block, 0.0, 1, 6).map_or(0.0, |s| s.values[0]);
        if min <= 1e-10 * largest {
            return Err(Error::DegenerateKernel { second: min, largest });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodicOptions {
    pub dt_max: f64,
    pub steps_per_period: f64,
    /// Trace-distance change between successive period averages.
    pub tolerance: f64,
    /// Simulated-time cap (seconds).
    pub max_time: f64,
}

impl Default for PeriodicOptions {
    fn default() -> Self {
        Self {
            dt_max: 0.5e-9,
            steps_per_period: 50.0,
            tolerance: 1e-6,
            max_time: 200e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PeriodicSteadyState {
    /// Period-averaged state.
    pub state: DensityMatrix,
    pub periods: usize,
    pub simulated_time: f64,
    pub last_delta: f64,
}

/// Period-averaged asymptotic state of a periodically driven model, started
/// from the all-ground basis state.
pub fn steady_state_periodic(
    model: &LiouvillianModel,
    period: f64,
    opts: &PeriodicOptions,
) -> Result<PeriodicSteadyState> {
    let rho0 = DensityMatrix::basis_state(model.layout(), 0)?;
    steady_state_periodic_from(model, &rho0, period, opts)
}

pub fn steady_state_periodic_from(
    model: &LiouvillianModel,
    rho0: &DensityMatrix,
    period: f64,
    opts: &PeriodicOptions,
) -> Result<PeriodicSteadyState> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidParameter(format!("period {period} must be positive")));
    }
    let evo = EvolveOptions {
        dt_max: opts.dt_max,
        steps_per_period: opts.steps_per_period,
        ..EvolveOptions::default()
    };
    let dt_target = evo.step_for(model)?;
    let per_period = ((period / dt_target).ceil() as usize).max(1);
    let dt = period / per_period as f64;
    let max_periods = (opts.max_time / period).floor() as usize;
    if max_periods == 0 {
        return Err(Error::InvalidParameter("period exceeds the simulated-time cap".into()));
    }

    let layout = model.layout().clone();
    let d = model.dim();
    let sector = model.generator().sector(&support(rho0.as_operator()));
    let g = &sector.generator;
    let mut x = sector.gather(rho0.as_operator().data());
    let mut rk = Rk4::new(x.len());
    let mut avg = vec![ZERO; x.len()];
    let mut previous: Option<OperatorMatrix> = None;
    let mut delta = f64::INFINITY;
    let mut t = 0.0;
    for p in 1..=max_periods {
        avg.iter_mut().for_each(|z| *z = ZERO);
        for s in 0..per_period {
            for (a, &v) in avg.iter_mut().zip(&x) {
                *a += v;
            }
            rk.step(g, &mut x, t, dt);
            t = ((p - 1) * per_period + s + 1) as f64 * dt;
        }
        let drift = (trace_of(&sector, &x, d) - ONE).norm();
        if drift > TRACE_DRIFT_TOL {
            return Err(Error::TraceDrift(drift));
        }
        let mean = sector
            .scatter(&avg, &layout)
            .scale_real(1.0 / per_period as f64)
            .hermitian_part();
        if let Some(prev) = &previous {
            delta = crate::qlinalg::trace_distance(&mean, prev)?;
            if delta < opts.tolerance {
                let state = DensityMatrix::with_positivity_tol(mean, 1e-6)?;
                return Ok(PeriodicSteadyState {
                    state,
                    periods: p,
                    simulated_time: t,
                    last_delta: delta,
                });
            }
        }
        previous = Some(mean);
    }
    Err(Error::NotConverged { simulated: t, delta })
}

/// Period average of a driven model solved in a co-rotating frame.
///
/// `frame_model` is the static model seen from the frame generated by a
/// diagonal charge operator `Q` (entries `charges`); the lab-frame state is
/// `e^{-iθQt} ρ_frame e^{iθQt}`, whose period average keeps only the blocks
/// of equal charge.
pub fn steady_state_co_rotating(frame_model: &LiouvillianModel, charges: &[f64]) -> Result<DensityMatrix> {
    let d = frame_model.dim();
    if charges.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: charges.len(),
        });
    }
    let rho = steady_state(frame_model)?;
    let averaged = OperatorMatrix::from_fn(frame_model.layout(), |i, j| {
        if (charges[i] - charges[j]).abs() < 1e-9 {
            rho.get(i, j)
        } else {
            ZERO
        }
    });
    DensityMatrix::new(averaged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{annihilation, embed, SpaceLayout};
    use approx::assert_abs_diff_eq;

    fn decay_model(gamma: f64) -> LiouvillianModel {
        let l = SpaceLayout::qubits(1);
        let a = annihilation(2).with_layout(&l).unwrap();
        LiouvillianModel::new(
            OperatorMatrix::zeros(&l),
            vec![],
            vec![JumpOperator {
                label: "decay".into(),
                operator: a.scale_real(gamma.sqrt()),
            }],
        )
        .unwrap()
    }

    #[test]
    fn dissipator_on_ground_is_zero() {
        let l = SpaceLayout::qubits(1);
        let a = annihilation(2).with_layout(&l).unwrap().scale_real(3f64.sqrt());
        let g = DensityMatrix::basis_state(&l, 0).unwrap();
        assert_eq!(dissipator(&a, g.as_operator()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn dissipator_on_excited() {
        let gamma: f64 = 2.5;
        let l = SpaceLayout::qubits(1);
        let a = annihilation(2).with_layout(&l).unwrap().scale_real(gamma.sqrt());
        let e = DensityMatrix::basis_state(&l, 1).unwrap();
        let out = dissipator(&a, e.as_operator()).unwrap();
        assert_abs_diff_eq!(out.get(0, 0).re, gamma, epsilon = 1e-14);
        assert_abs_diff_eq!(out.get(1, 1).re, -gamma, epsilon = 1e-14);
        assert_abs_diff_eq!(out.get(0, 1).norm(), 0.0);
    }

    #[test]
    fn generator_columns_match_dense_rhs() {
        let l = SpaceLayout::new(vec![2, 3], vec!["Q1", "R1"]).unwrap();
        let a = embed(&annihilation(2), "Q1", &l).unwrap();
        let b = embed(&annihilation(3), "R1", &l).unwrap();
        let h = &(&a.adjoint() * &b) + &(&a * &b.adjoint());
        let h = &h + &(&b.adjoint() * &b).scale_real(0.7);
        let v = (&a.adjoint() * &b.adjoint()).scale_real(0.3);
        let model = LiouvillianModel::new(
            h,
            vec![OscillatingTerm {
                operator: v,
                frequency: 1.3,
            }],
            vec![
                JumpOperator {
                    label: "b".into(),
                    operator: b.scale_real(0.9),
                },
                JumpOperator {
                    label: "bd".into(),
                    operator: b.adjoint().scale_real(0.2),
                },
            ],
        )
        .unwrap();
        let g = model.generator();
        let d = model.dim();
        let t = 0.37;
        for col in 0..d * d {
            let mut e = vec![ZERO; d * d];
            e[col] = ONE;
            let mut out = vec![ZERO; d * d];
            g.apply(&e, t, &mut out);
            let basis = OperatorMatrix::from_data(&l, e).unwrap();
            let dense = lindblad_rhs(&model, &basis, t).unwrap();
            for (x, y) in out.iter().zip(dense.data()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn exponential_decay_matches_analytic() {
        let gamma = 1.0e5;
        let m = decay_model(gamma);
        let e = DensityMatrix::basis_state(m.layout(), 1).unwrap();
        let t = 3.0 / gamma;
        let opts = EvolveOptions {
            dt_max: 1e-8,
            ..Default::default()
        };
        let r = evolve(&m, &e, t, &opts).unwrap();
        let pe = r.final_state.get(1, 1).re;
        assert_abs_diff_eq!(pe, (-3.0f64).exp(), epsilon = 1e-6);
        assert!(r.max_trace_drift < 1e-12);
        for w in r.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn detailed_balance_steady_state() {
        let gamma: f64 = 1.0;
        let n: f64 = 0.025;
        let l = SpaceLayout::qubits(1);
        let a = annihilation(2).with_layout(&l).unwrap();
        let m = LiouvillianModel::new(
            OperatorMatrix::zeros(&l),
            vec![],
            vec![
                JumpOperator {
                    label: "down".into(),
                    operator: a.scale_real((gamma * (1.0 + n)).sqrt()),
                },
                JumpOperator {
                    label: "up".into(),
                    operator: a.adjoint().scale_real((gamma * n).sqrt()),
                },
            ],
        )
        .unwrap();
        let rho = steady_state(&m).unwrap();
        assert_abs_diff_eq!(rho.get(1, 1).re, n / (1.0 + 2.0 * n), epsilon = 1e-12);
        assert_abs_diff_eq!(rho.get(1, 1).re, 0.023_809_523_809_523_808, epsilon = 1e-12);
    }

    #[test]
    fn no_jumps_is_degenerate() {
        let l = SpaceLayout::qubits(2);
        let h = embed(&crate::qlinalg::pauli_z(), "Q1", &l).unwrap();
        let m = LiouvillianModel::new(h, vec![], vec![]).unwrap();
        assert!(matches!(steady_state(&m), Err(Error::DegenerateKernel { .. })));
    }

    #[test]
    fn time_dependent_rejected_by_static_solver() {
        let l = SpaceLayout::qubits(1);
        let x = crate::qlinalg::pauli_x().with_layout(&l).unwrap();
        let m = LiouvillianModel::new(
            OperatorMatrix::zeros(&l),
            vec![OscillatingTerm {
                operator: x,
                frequency: 1.0,
            }],
            vec![],
        )
        .unwrap();
        assert!(matches!(steady_state(&m), Err(Error::TimeDependentModel)));
    }

    #[test]
    fn step_budget_is_enforced() {
        let m = decay_model(1e5);
        let e = DensityMatrix::basis_state(m.layout(), 1).unwrap();
        let opts = EvolveOptions {
            dt_max: 1e-9,
            max_steps: 10,
            ..Default::default()
        };
        assert!(matches!(
            evolve(&m, &e, 1e-6, &opts),
            Err(Error::StepBudgetExceeded { .. })
        ));
    }
}
