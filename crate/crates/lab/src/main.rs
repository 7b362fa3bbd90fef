// Copyright 2026 The zo-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `zo-lab`: run stability calculations and desk-scale training experiments
//! from JSON configs, writing CSV or JSON result tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zo_lab::config::{ConfigFile, ExperimentSpec};
use zo_lab::experiments;
use zo_lab::table::{OutputFormat, ResultTable};
use zo_lab::LabError;

#[derive(Parser)]
#[command(name = "zo-lab", version, about = "Zeroth-order stability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output path for the result table (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output format.
    #[arg(long, value_parser = ["csv", "json"], default_value = "csv")]
    format: String,
}

impl CommonArgs {
    fn format(&self) -> OutputFormat {
        match self.format.as_str() {
            "json" => OutputFormat::Json,
            _ => OutputFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Critical step sizes with trace/top-eigenvalue bounds.
    Threshold(CommonArgs),
    /// Spectral radius of a covariance operator at a probe step size.
    Rho(CommonArgs),
    /// Monte-Carlo stability scan over a step-size grid.
    Simulate(CommonArgs),
    /// Edge-of-stability training run on the tiny MLP.
    Train(TrainArgs),
    /// Training run with mid-run step-size increases.
    Catapult(TrainArgs),
    /// Smoothing-parameter sweep.
    SweepMu(CommonArgs),
    /// Batch-size sweep.
    SweepBatch(CommonArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also write the per-step trajectory CSV here.
    #[arg(long)]
    trajectory_out: Option<PathBuf>,
    /// Export the (possibly synthetic) training dataset as CSV.
    #[arg(long)]
    export_dataset: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load(common: &CommonArgs, expected_kind: &str) -> Result<(ConfigFile, u64), LabError> {
    let cfg = ConfigFile::load(&common.config)?;
    if cfg.experiment.kind_name() != expected_kind {
        return Err(LabError::InvalidConfig(format!(
            "experiment kind {:?} does not match the {expected_kind:?} subcommand",
            cfg.experiment.kind_name()
        )));
    }
    let seed = common.seed.unwrap_or(cfg.seed);
    Ok((cfg, seed))
}

fn emit(table: &ResultTable, common: &CommonArgs) -> Result<(), LabError> {
    match &common.out {
        Some(path) => table.write_to_path(path, common.format()),
        None => match common.format() {
            OutputFormat::Csv => table.write_csv(std::io::stdout().lock()),
            OutputFormat::Json => table.write_json(std::io::stdout().lock()),
        },
    }
}

fn run() -> Result<(), LabError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Threshold(common) => {
            let (cfg, seed) = load(&common, "threshold_table")?;
            let ExperimentSpec::ThresholdTable(spec) = &cfg.experiment else { unreachable!() };
            let table = experiments::run_threshold_table(spec, seed)?;
            emit(&table, &common)
        }
        Command::Rho(common) => {
            let (cfg, seed) = load(&common, "rho")?;
            let ExperimentSpec::Rho(spec) = &cfg.experiment else { unreachable!() };
            let (json_out, table) = experiments::run_rho(spec, seed)?;
            match common.format() {
                OutputFormat::Json => {
                    let text = serde_json::to_string_pretty(&json_out)?;
                    match &common.out {
                        Some(path) => std::fs::write(path, text)?,
                        None => println!("{text}"),
                    }
                    Ok(())
                }
                OutputFormat::Csv => emit(&table, &common),
            }
        }
        Command::Simulate(common) => {
            let (cfg, seed) = load(&common, "mc_stability")?;
            let ExperimentSpec::McStability(spec) = &cfg.experiment else { unreachable!() };
            let table = experiments::run_mc_stability(spec, seed)?;
            emit(&table, &common)
        }
        Command::Train(args) => {
            let (cfg, seed) = load(&args.common, "eos_track")?;
            let ExperimentSpec::EosTrack(spec) = &cfg.experiment else { unreachable!() };
            export_dataset_if_requested(spec, seed, &args)?;
            let outcome = experiments::run_eos_track(spec, seed)?;
            write_trajectory_if_requested(&outcome.record, &args)?;
            emit(&outcome.table, &args.common)
        }
        Command::Catapult(args) => {
            let (cfg, seed) = load(&args.common, "catapult")?;
            let ExperimentSpec::Catapult(spec) = &cfg.experiment else { unreachable!() };
            export_dataset_if_requested(&spec.base, seed, &args)?;
            let outcome = experiments::run_catapult(spec, seed)?;
            write_trajectory_if_requested(&outcome.record, &args)?;
            emit(&outcome.table, &args.common)
        }
        Command::SweepMu(common) => {
            let (cfg, seed) = load(&common, "mu_sweep")?;
            let ExperimentSpec::MuSweep(spec) = &cfg.experiment else { unreachable!() };
            let table = experiments::run_mu_sweep(spec, seed)?;
            emit(&table, &common)
        }
        Command::SweepBatch(common) => {
            let (cfg, seed) = load(&common, "batch_sweep")?;
            let ExperimentSpec::BatchSweep(spec) = &cfg.experiment else { unreachable!() };
            let table = experiments::run_batch_sweep(spec, seed)?;
            emit(&table, &common)
        }
    }
}

fn export_dataset_if_requested(
    spec: &zo_lab::config::EosSpec,
    seed: u64,
    args: &TrainArgs,
) -> Result<(), LabError> {
    if let Some(path) = &args.export_dataset {
        let data = experiments::materialize_dataset(spec, seed)?;
        let file = std::fs::File::create(path)?;
        zo_lab::io::write_dataset_csv(file, &data)?;
    }
    Ok(())
}

fn write_trajectory_if_requested(
    record: &zo_core::optimizer::TrajectoryRecord,
    args: &TrainArgs,
) -> Result<(), LabError> {
    if let Some(path) = &args.trajectory_out {
        let file = std::fs::File::create(path)?;
        zo_lab::io::write_trajectory_csv(file, record)?;
    }
    Ok(())
}
