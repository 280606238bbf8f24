// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Open-system simulation of reservoir-engineered qubit lattices, with
//! measurement sampling, classical shadows and state tomography.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
mod kernel;
pub mod lindblad;
pub mod measurement;
pub mod observables;
pub mod qlinalg;
pub mod reservoir_model;
pub mod shadows;
pub mod tomography;

pub use error::{Error, Result};
