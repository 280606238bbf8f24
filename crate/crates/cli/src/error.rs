// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: resbath_core::Error,
    },

    #[error(transparent)]
    Core(#[from] resbath_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver { .. } => "solver",
            CliError::Core(_) => "core",
            CliError::Io(_) => "io",
            CliError::Toml(_) => "toml",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
        }
    }
}

/// Machine-readable failure report printed on stderr.
#[derive(Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
}

impl From<&CliError> for ErrorReport {
    fn from(e: &CliError) -> Self {
        Self {
            error: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T>;
}

impl<T> Context<T> for resbath_core::Result<T> {
    fn context(self, what: impl Into<String>) -> CliResult<T> {
        self.map_err(|source| CliError::Solver {
            context: what.into(),
            source,
        })
    }
}
