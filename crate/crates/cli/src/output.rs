// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

//! Result files: CSV with a header row, pretty JSON, and the run manifest.
//! Every file is written to a temporary name and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{NoisePreset, ScenarioConfig};
use crate::error::CliResult;

fn atomic_write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Shortest representation that round-trips.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    atomic_write(path, &bytes)
}

/// FNV-1a, stable across builds; identifies the inputs of a sweep point.
pub fn fingerprint(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Serialize)]
pub struct Units {
    pub frequencies: &'static str,
    pub intrinsic_rates: &'static str,
    pub times: &'static str,
}

pub const UNITS: Units = Units {
    frequencies: "MHz, angular (x 2 pi rad/s)",
    intrinsic_rates: "kHz, angular (x 2 pi rad/s)",
    times: "us",
};

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub seed: u64,
    pub units: Units,
    /// Readout imperfections are illustrative values, not device data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imperfection_note: Option<&'static str>,
    pub config: &'a ScenarioConfig,
    pub diagnostics: serde_json::Value,
    pub files: Vec<String>,
}

pub fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &ScenarioConfig,
    diagnostics: serde_json::Value,
    files: &[PathBuf],
) -> CliResult<PathBuf> {
    let note = match cfg.estimation.noise {
        NoisePreset::Illustrative => Some("illustrative imperfection preset; not a hardware claim"),
        _ => None,
    };
    let m = Manifest {
        tool: "resbath",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed,
        units: UNITS,
        imperfection_note: note,
        config: cfg,
        diagnostics,
        files: files
            .iter()
            .map(|p| p.strip_prefix(out).unwrap_or(p).to_string_lossy().into_owned())
            .collect(),
    };
    let path = out.join(format!("{}_{command}_manifest.json", cfg.name));
    write_json(&path, &m)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-9, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn fingerprint_is_stable() {
        assert_eq!(fingerprint(b""), "cbf29ce484222325");
        assert_ne!(fingerprint(b"a"), fingerprint(b"b"));
    }
}
