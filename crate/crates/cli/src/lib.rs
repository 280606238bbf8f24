// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario configs, sweeps and estimation runs on top of `resbath-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod estimate;
pub mod output;
pub mod run;

pub use error::{CliError, CliResult};
