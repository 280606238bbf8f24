// Copyright 2026 The resbath Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use resbath_cli::commands::{self, SweepOptions};
use resbath_cli::config::{Loaded, Toggle};
use resbath_cli::error::{CliError, CliResult, ErrorReport};

#[derive(Parser)]
#[command(
    name = "resbath",
    version,
    about = "Dissipative Bell-state stabilisation: simulate, sweep, estimate"
)]
struct Cli {
    /// Scenario TOML; the `device` preset alone when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for sweeps, trajectories and estimation (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time evolution from each initial state, plus steady state and estimates.
    Simulate,
    /// Steady-state observables over the `[sweep]` grid.
    Sweep {
        /// Compute only points with index % N == I, given as I/N.
        #[arg(long, value_parser = parse_shard)]
        shard: Option<(usize, usize)>,
        /// Assemble the CSV from existing point markers without computing.
        #[arg(long)]
        merge: bool,
    },
    /// Steady-state fidelity change for each idealisation.
    Ablate {
        /// Comma-separated toggles; defaults to `[ablation].toggles`.
        #[arg(long, value_delimiter = ',', value_parser = parse_toggle)]
        toggles: Option<Vec<Toggle>>,
    },
    /// Shadow dataset of the steady state with standard and robust estimates.
    Shadows {
        /// Existing shot CSV (with a `.json` sidecar) instead of simulating.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Existing calibration JSON instead of generating one.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Pauli tomography of the steady state.
    Tomography,
    /// Readout-channel calibration from all-ground shots.
    CalibrateShadows {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn parse_shard(s: &str) -> Result<(usize, usize), String> {
    let (i, n) = s.split_once('/').ok_or("expected I/N")?;
    let i: usize = i.parse().map_err(|_| "bad shard index")?;
    let n: usize = n.parse().map_err(|_| "bad shard count")?;
    if n == 0 || i >= n {
        return Err("need 0 <= I < N".into());
    }
    Ok((i, n))
}

fn parse_toggle(s: &str) -> Result<Toggle, String> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string())).map_err(|_| format!("unknown toggle `{s}`"))
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut loaded = match &cli.config {
        Some(p) => Loaded::load(p)?,
        None => Loaded::parse("")?,
    };
    if let Some(s) = cli.seed {
        loaded = loaded.with_seed(s);
    }
    let out = &cli.out;
    std::fs::create_dir_all(out)?;
    match cli.command {
        Command::Simulate => commands::simulate(&loaded, out),
        Command::Sweep { shard, merge } => commands::sweep(
            &loaded,
            out,
            &SweepOptions {
                shard,
                merge_only: merge,
            },
        ),
        Command::Ablate { toggles } => commands::ablate(&loaded, out, toggles.as_deref()),
        Command::Shadows { input, calibration } => {
            commands::shadows(&loaded, out, input.as_deref(), calibration.as_deref())
        }
        Command::Tomography => commands::tomography(&loaded, out),
        Command::CalibrateShadows { input } => commands::calibrate_shadows(&loaded, out, input.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = ErrorReport::from(&e);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::FAILURE
        }
    }
}
