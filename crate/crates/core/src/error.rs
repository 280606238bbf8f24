// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("matrix is not Hermitian (max |A - A^dag| = {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "steady state is not unique: second-smallest singular value {second:.3e} \
         is below 1e-10 of the largest {largest:.3e}"
    )]
    DegenerateKernel { second: f64, largest: f64 },

    #[error("steady-state residual {residual:.3e} exceeds the allowed {allowed:.3e}")]
    SteadyStateResidual { residual: f64, allowed: f64 },

    #[error("model has oscillating terms; use the periodic steady-state solver")]
    TimeDependentModel,

    #[error("integration needs {required} steps but the budget is {budget}")]
    StepBudgetExceeded { required: u64, budget: u64 },

    #[error("trace drifted by {0:.3e} during integration")]
    TraceDrift(f64),

    #[error("periodic steady state not converged after {simulated:.3e} s (last delta {delta:.3e})")]
    NotConverged { simulated: f64, delta: f64 },

    #[error("assignment matrix is singular (det = {0:.3e})")]
    SingularAssignment(f64),

    #[error("noise too strong for shadow inversion on qubit {qubit}: G = {survival:.4}")]
    NoiseTooStrong { qubit: usize, survival: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("group size {0} is too small for a pairwise estimator")]
    GroupTooSmall(usize),

    #[error("missing Pauli word `{0}`")]
    MissingWord(String),

    #[error("invalid Pauli word `{0}`")]
    InvalidPauli(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
