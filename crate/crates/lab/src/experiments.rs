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

//! Experiment drivers: threshold tables, operator spectral radii,
//! Monte-Carlo stability scans, edge-of-stability training runs, catapult
//! schedules, and the smoothing/batch-size sweeps.

use rayon::prelude::*;
use serde::Serialize;

use zo_core::covariance::{
    assemble_operator, implied_ms_threshold, mc_second_moment, spectral_radius, CovFamily,
    EstimatorVariant,
};
use zo_core::curvature::CurvatureSnapshot;
use zo_core::estimator::estimate_gradient_with;
use zo_core::linalg::Spectrum;
use zo_core::mlp::MlpModel;
use zo_core::objective::{make_synthetic_dataset, Objective, QuadraticModel, TargetKind};
use zo_core::optimizer::{
    run_trajectory, step, EtaPhase, GradientSource, OptimizerConfig, OptimizerState,
    TrajectoryOptions, TrajectoryRecord,
};
use zo_core::rng::RngStream;
use zo_core::stability::{
    classify_stepsize, solve_with_probe, tracked_band, StabilityFamily, StabilityQuery,
    StepsizeClass,
};

use crate::config::{
    BatchSweepSpec, CatapultSpec, EosSpec, FamilyTag, McStabilitySpec, MuSweepSpec, RhoSpec,
    ThresholdSpec, VariantTag,
};
use crate::table::{ResultTable, Row};
use crate::LabError;

/// Numeric encoding of a step-size classification for table rows.
pub fn class_code(class: StepsizeClass) -> f64 {
    match class {
        StepsizeClass::Stable => 0.0,
        StepsizeClass::Critical => 1.0,
        StepsizeClass::Unstable => 2.0,
    }
}

pub fn class_name(class: StepsizeClass) -> &'static str {
    match class {
        StepsizeClass::Stable => "stable",
        StepsizeClass::Critical => "critical",
        StepsizeClass::Unstable => "unstable",
    }
}

// ---------------------------------------------------------------------------
// Threshold table
// ---------------------------------------------------------------------------

pub fn run_threshold_table(spec: &ThresholdSpec, _seed: u64) -> Result<ResultTable, LabError> {
    let mut table = ResultTable::new();
    for (i, qs) in spec.queries.iter().enumerate() {
        let query = qs.to_query()?;
        let report = solve_with_probe(&query, qs.probe_eta)?;
        let point = format!("q{i}:{:?}", qs.family).to_lowercase();
        table.push(Row::new(&point, "eta_mean_star", report.eta_mean_star));
        table.push(Row::new(&point, "eta_ms_star", report.eta_ms_star));
        table.push(Row::new(&point, "lower_bound", report.lower_bound));
        table.push(Row::new(&point, "upper_bound", report.upper_bound));
        if let Some((eta, class)) = report.probe {
            table.push(Row::new(&point, "probe_eta", eta));
            table.push(Row::new(&point, "probe_class", class_code(class)));
        }
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Spectral radius
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RhoOutput {
    pub family: String,
    pub eta: f64,
    pub beta: f64,
    pub spectrum: Vec<f64>,
    pub rho: f64,
    pub eta_ms_star: f64,
    pub classification: String,
}

pub fn run_rho(spec: &RhoSpec, _seed: u64) -> Result<(RhoOutput, ResultTable), LabError> {
    let spectrum = Spectrum::new(spec.spectrum.clone())
        .map_err(|e| LabError::InvalidConfig(format!("spectrum: {e}")))?;
    let variant = match spec.estimator_variant {
        VariantTag::Gaussian => EstimatorVariant::Gaussian,
        VariantTag::Sphere => EstimatorVariant::Sphere,
        VariantTag::MultiQuery => EstimatorVariant::MultiQuery(spec.queries),
    };
    let cov_family = match spec.family {
        FamilyTag::ZoGd => CovFamily::ZoGd,
        FamilyTag::ZoGdm => CovFamily::ZoGdm { beta: spec.momentum },
        FamilyTag::FrozenZoAdam => CovFamily::FrozenZoAdam {
            beta1: spec.momentum,
            sigma: spec.sigma.clone().unwrap_or_default(),
        },
        _ => unreachable!("validated as zeroth-order"),
    };
    let op = assemble_operator(&cov_family, &spectrum, spec.eta, variant)?;
    let rho = spectral_radius(&op);

    let (eta_ms_star, classification) = if variant == EstimatorVariant::Gaussian {
        let query = StabilityQuery::new(spectrum.clone(), spec.family.to_stability_family(spec.momentum)?)?;
        let report = solve_with_probe(&query, Some(spec.eta))?;
        (report.eta_ms_star, class_name(report.probe.unwrap().1).to_string())
    } else {
        let star = implied_ms_threshold(variant, &spectrum)?;
        let class = if (rho - 1.0).abs() <= 1e-9 {
            "critical"
        } else if rho < 1.0 {
            "stable"
        } else {
            "unstable"
        };
        (star, class.to_string())
    };

    let out = RhoOutput {
        family: format!("{:?}", spec.family).to_lowercase(),
        eta: spec.eta,
        beta: spec.momentum,
        spectrum: spec.spectrum.clone(),
        rho,
        eta_ms_star,
        classification: classification.clone(),
    };
    let mut table = ResultTable::new();
    let point = format!("{}:eta={}", out.family, spec.eta);
    table.push(Row::new(&point, "rho", rho));
    table.push(Row::new(&point, "eta_ms_star", eta_ms_star));
    let class_value = match classification.as_str() {
        "stable" => 0.0,
        "critical" => 1.0,
        _ => 2.0,
    };
    table.push(Row::new(&point, "probe_class", class_value));
    Ok((out, table))
}

// ---------------------------------------------------------------------------
// Monte-Carlo stability scan
// ---------------------------------------------------------------------------

/// Least-squares slope of `ln y` against the step index over `window`.
fn log_slope(totals: &[f64], window: std::ops::Range<usize>) -> Option<f64> {
    let pts: Vec<(f64, f64)> = window
        .filter_map(|t| {
            let y = *totals.get(t)?;
            (y.is_finite() && y > 0.0).then_some((t as f64, y.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    (denom.abs() > 0.0).then(|| (n * sxy - sx * sy) / denom)
}

pub fn run_mc_stability(spec: &McStabilitySpec, seed: u64) -> Result<ResultTable, LabError> {
    if matches!(spec.family, FamilyTag::FrozenZoAdam | FamilyTag::FrozenAdam) {
        return Err(LabError::InvalidConfig(
            "family: the stability scan supports the GD/GDM families".into(),
        ));
    }
    let spectrum = Spectrum::new(spec.spectrum.clone())
        .map_err(|e| LabError::InvalidConfig(format!("spectrum: {e}")))?;
    let quad = QuadraticModel::from_diagonal(
        spectrum.values().to_vec(),
        vec![0.0; spectrum.len()],
        0.0,
    )?;
    let stab_family = spec.family.to_stability_family(spec.momentum)?;
    let root = RngStream::new(seed, 0);
    let est = spec.estimator.to_config()?;

    let per_eta: Vec<Result<Vec<Row>, LabError>> = spec
        .eta_grid
        .par_iter()
        .enumerate()
        .map(|(idx, &eta)| {
            let point = format!("eta={eta}");
            let mut rows = Vec::new();
            let theory_class = classify_stepsize(
                &StabilityQuery::new(spectrum.clone(), stab_family)?,
                eta,
            )?;

            let (rate, rate_se, mean_curve) = if spec.family.is_zeroth_order() {
                let cfg = match spec.family {
                    FamilyTag::ZoGd => OptimizerConfig::ZoGd { eta },
                    FamilyTag::ZoGdm => OptimizerConfig::ZoGdm { eta, beta: spec.momentum },
                    _ => unreachable!(),
                };
                let per_group = spec.replicates / spec.groups;
                let window = spec.steps / 3..spec.steps + 1;
                let mut rates = Vec::with_capacity(spec.groups);
                let mut curves: Vec<Vec<f64>> = Vec::new();
                for g in 0..spec.groups {
                    let stream = root.substream(100 + idx as u64).substream(g as u64);
                    let mc = mc_second_moment(&cfg, &est, &quad, &spec.x0, spec.steps, per_group, &stream)?;
                    if let Some(r) = log_slope(&mc.mean_sq, window.clone()) {
                        rates.push(r);
                    }
                    curves.push(mc.mean_sq);
                }
                if rates.len() < 2 {
                    return Err(LabError::InvalidConfig(format!(
                        "growth rate unavailable at eta={eta} (degenerate second moments)"
                    )));
                }
                let n = rates.len() as f64;
                let mean = rates.iter().sum::<f64>() / n;
                let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
                let se = (var / n).sqrt();
                // Pooled curve for reporting.
                let t_len = curves[0].len();
                let pooled: Vec<f64> = (0..t_len)
                    .map(|t| curves.iter().map(|c| c.get(t).copied().unwrap_or(f64::NAN)).sum::<f64>() / curves.len() as f64)
                    .collect();
                (mean, se, pooled)
            } else {
                // Deterministic first-order run.
                let cfg = match spec.family {
                    FamilyTag::Gd => OptimizerConfig::Gd { eta },
                    FamilyTag::Gdm => OptimizerConfig::Gdm { eta, beta: spec.momentum },
                    _ => unreachable!(),
                };
                let mut state = OptimizerState::init(&cfg, spec.x0.clone());
                let mut totals = vec![state.x.iter().map(|v| v * v).sum::<f64>()];
                for _ in 0..spec.steps {
                    let g = quad.gradient(&state.x)?;
                    state = step(&cfg, &state, &g)?;
                    totals.push(state.x.iter().map(|v| v * v).sum::<f64>());
                }
                let rate = log_slope(&totals, spec.steps / 3..spec.steps + 1)
                    .ok_or_else(|| LabError::InvalidConfig("degenerate first-order run".into()))?;
                (rate, 0.0, totals)
            };

            let empirical = if spec.family.is_zeroth_order() {
                if rate > 3.0 * rate_se {
                    StepsizeClass::Unstable
                } else if rate < -3.0 * rate_se {
                    StepsizeClass::Stable
                } else {
                    StepsizeClass::Critical
                }
            } else if rate > 1e-12 {
                StepsizeClass::Unstable
            } else if rate < -1e-12 {
                StepsizeClass::Stable
            } else {
                StepsizeClass::Critical
            };

            for (t, v) in mean_curve.iter().enumerate() {
                rows.push(Row::new(&point, "mean_sq", *v).at_step(t as u64));
            }
            rows.push(Row::new(&point, "rate", rate).with_se(rate_se));
            rows.push(Row::new(&point, "class_empirical", class_code(empirical)));
            rows.push(Row::new(&point, "class_theory", class_code(theory_class)));
            // The dead zone is only admissible where the theory itself says
            // critical; elsewhere the classes must coincide.
            let agrees = empirical == theory_class || theory_class == StepsizeClass::Critical;
            rows.push(Row::new(&point, "class_match", if agrees { 1.0 } else { 0.0 }));

            if spec.family.is_zeroth_order() {
                let cov_family = match spec.family {
                    FamilyTag::ZoGd => CovFamily::ZoGd,
                    FamilyTag::ZoGdm => CovFamily::ZoGdm { beta: spec.momentum },
                    _ => unreachable!(),
                };
                if let Ok(op) = assemble_operator(&cov_family, &spectrum, eta, EstimatorVariant::Gaussian) {
                    rows.push(Row::new(&point, "log_rho", spectral_radius(&op).ln()));
                }
            }
            Ok(rows)
        })
        .collect();

    let mut table = ResultTable::new();
    for rows in per_eta {
        table.extend(rows?);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Edge-of-stability training
// ---------------------------------------------------------------------------

const STREAM_DATASET: u64 = 10;
const STREAM_INIT: u64 = 11;
const STREAM_TRAIN: u64 = 12;
const STREAM_ETA_PROBE: u64 = 13;
const STREAM_BATCH: u64 = 14;

/// Everything a training run produced: the result table, the raw trajectory,
/// and the headline summary numbers.
#[derive(Debug, Clone)]
pub struct EosOutcome {
    pub table: ResultTable,
    pub record: TrajectoryRecord,
    pub eta: f64,
    /// Band threshold the curvature is tracked against
    /// (`2/eta`, `2(1-beta)/eta`, or the FO analogue).
    pub threshold: f64,
    /// Final-quarter median of the tracked trace (preconditioned for Adam).
    pub median_trace: Option<f64>,
    pub median_lambda: Option<f64>,
    pub diverged: bool,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(values[values.len() / 2])
}

/// The dataset exactly as a training run with this seed would build it.
pub fn materialize_dataset(
    spec: &EosSpec,
    seed: u64,
) -> Result<zo_core::objective::Dataset, LabError> {
    let root = RngStream::new(seed, 0);
    let (mlp, _) = build_model(spec, &root)?;
    Ok(mlp.dataset().clone())
}

fn build_model(spec: &EosSpec, root: &RngStream) -> Result<(MlpModel, Vec<f64>), LabError> {
    let widths = &spec.objective.widths;
    let p = widths[0];
    let c = *widths.last().unwrap();
    let data = match &spec.objective.dataset_csv {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            let kind = match spec.objective.dataset_kind {
                crate::config::DatasetKindTag::GaussianClusters => TargetKind::OneHot,
                crate::config::DatasetKindTag::TeacherMlp => TargetKind::Regression,
            };
            crate::io::read_dataset_csv(file, kind)?
        }
        None => make_synthetic_dataset(
            spec.objective.dataset_samples,
            p,
            c,
            spec.objective.dataset_kind.into(),
            &root.substream(STREAM_DATASET),
        )?,
    };
    let mlp = MlpModel::new(widths, spec.objective.activation.into(), data)?;
    let x0 = mlp.init_params(spec.objective.init_gain, &root.substream(STREAM_INIT));
    Ok((mlp, x0))
}

fn resolve_eta(spec: &EosSpec, mlp: &MlpModel, x0: &[f64], root: &RngStream) -> Result<(f64, CurvatureSnapshot), LabError> {
    let snap0 = zo_core::curvature::probe_curvature(
        mlp,
        x0,
        spec.trace_probes,
        spec.power_iters,
        &root.substream(STREAM_ETA_PROBE),
    )?;
    let eta = match spec.eta_rule {
        crate::config::EtaRule::Fixed { eta } => eta,
        crate::config::EtaRule::TraceFraction { fraction } => 2.0 * fraction / snap0.trace,
        crate::config::EtaRule::LambdaFraction { fraction } => 2.0 * fraction / snap0.lambda_max,
    };
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(LabError::InvalidConfig(format!(
            "eta_rule produced a non-positive step size ({eta}); initial curvature may be degenerate"
        )));
    }
    Ok((eta, snap0))
}

fn band_family(spec: &EosSpec) -> Option<StabilityFamily> {
    match spec.optimizer.family {
        FamilyTag::ZoGd => Some(StabilityFamily::ZoGd),
        FamilyTag::ZoGdm => Some(StabilityFamily::ZoGdm { beta: spec.optimizer.momentum }),
        FamilyTag::FrozenZoAdam => Some(StabilityFamily::FrozenZoAdam { beta1: spec.optimizer.momentum }),
        _ => None,
    }
}

fn fo_threshold(spec: &EosSpec, eta: f64) -> f64 {
    match spec.optimizer.family {
        FamilyTag::Gd => 2.0 / eta,
        FamilyTag::Gdm => 2.0 * (1.0 + spec.optimizer.momentum) / eta,
        FamilyTag::FrozenAdam => {
            2.0 * (1.0 + spec.optimizer.momentum) / ((1.0 - spec.optimizer.momentum) * eta)
        }
        _ => 2.0 / eta,
    }
}

fn optimizer_config(spec: &EosSpec, eta: f64) -> Result<OptimizerConfig, LabError> {
    if spec.adam {
        spec.optimizer.to_adam_config(eta)
    } else {
        spec.optimizer.to_config(eta)
    }
}

/// Rows shared by every training-style experiment, plus the summary.
fn tabulate_eos(
    point: &str,
    spec: &EosSpec,
    eta: f64,
    record: &TrajectoryRecord,
) -> (ResultTable, f64, Option<f64>, Option<f64>) {
    let mut table = ResultTable::new();
    let zo_band = band_family(spec);
    let adam_like = spec.adam || matches!(spec.optimizer.family, FamilyTag::FrozenZoAdam);
    let threshold = match zo_band {
        Some(family) => tracked_band(&family, 0.0, 0.0, eta).map(|b| b.1).unwrap_or(2.0 / eta),
        None => fo_threshold(spec, eta),
    };

    for log in &record.steps {
        table.push(Row::new(point, "loss", log.loss).at_step(log.step as u64));
        if (log.eta - eta).abs() > 1e-15 * eta {
            table.push(Row::new(point, "eta", log.eta).at_step(log.step as u64));
        }
    }
    for snap in &record.snapshots {
        let s = snap.step as u64;
        table.push(Row::new(point, "lambda_max", snap.lambda_max).at_step(s));
        table.push(Row::new(point, "trace", snap.trace).at_step(s).with_se(snap.trace_se));
        if let (Some(pl), Some(pt)) = (snap.precond_lambda_max, snap.precond_trace) {
            table.push(Row::new(point, "precond_lambda_max", pl).at_step(s));
            let mut row = Row::new(point, "precond_trace", pt).at_step(s);
            if let Some(se) = snap.precond_trace_se {
                row = row.with_se(se);
            }
            table.push(row);
        }
        if let Some(rc) = snap.relcomm {
            let mut row = Row::new(point, "relcomm", rc).at_step(s);
            if let Some(se) = snap.relcomm_se {
                row = row.with_se(se);
            }
            table.push(row);
        }
        if let Some(family) = zo_band {
            let (tr, lam) = if adam_like {
                (snap.precond_trace.unwrap_or(snap.trace), snap.precond_lambda_max.unwrap_or(snap.lambda_max))
            } else {
                (snap.trace, snap.lambda_max)
            };
            if let Ok((lo, th, up)) = tracked_band(&family, tr, lam, log_eta_at(record, snap.step)) {
                table.push(Row::new(point, "band_lower", lo).at_step(s));
                table.push(Row::new(point, "band_threshold", th).at_step(s));
                table.push(Row::new(point, "band_upper", up).at_step(s));
            }
        }
    }
    if record.diverged {
        table.push(
            Row::new(point, "diverged", 1.0).at_step(record.diverged_at.unwrap_or_default() as u64),
        );
    }

    // Final-quarter medians of the tracked statistics.
    let total_steps = record.steps.last().map(|l| l.step).unwrap_or(0);
    let cut = total_steps.saturating_sub(total_steps / 4);
    let mut traces: Vec<f64> = record
        .snapshots
        .iter()
        .filter(|s| s.step >= cut)
        .map(|s| if adam_like { s.precond_trace.unwrap_or(s.trace) } else { s.trace })
        .collect();
    let mut lambdas: Vec<f64> = record
        .snapshots
        .iter()
        .filter(|s| s.step >= cut)
        .map(|s| if adam_like { s.precond_lambda_max.unwrap_or(s.lambda_max) } else { s.lambda_max })
        .collect();
    let median_trace = median(&mut traces);
    let median_lambda = median(&mut lambdas);
    if let Some(mt) = median_trace {
        table.push(Row::new(point, "final_quarter_median_trace", mt));
        table.push(Row::new(point, "trace_over_threshold", mt / threshold));
    }
    if let Some(ml) = median_lambda {
        table.push(Row::new(point, "final_quarter_median_lambda", ml));
        table.push(Row::new(point, "lambda_over_threshold", ml / threshold));
    }
    table.push(Row::new(point, "eta_resolved", eta));
    table.push(Row::new(point, "threshold", threshold));
    (table, threshold, median_trace, median_lambda)
}

fn log_eta_at(record: &TrajectoryRecord, step: usize) -> f64 {
    record
        .steps
        .iter()
        .find(|l| l.step == step)
        .map(|l| l.eta)
        .unwrap_or_else(|| record.steps.last().map(|l| l.eta).unwrap_or(1.0))
}

pub fn run_eos_track(spec: &EosSpec, seed: u64) -> Result<EosOutcome, LabError> {
    let root = RngStream::new(seed, 0);
    let (mlp, x0) = build_model(spec, &root)?;
    let (eta, _snap0) = resolve_eta(spec, &mlp, &x0, &root)?;
    run_training(spec, &root, eta, &[])
}

// ---------------------------------------------------------------------------
// Catapult
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CatapultPhase {
    pub start_step: usize,
    pub eta_new: f64,
    pub pre_switch_loss: f64,
    pub peak_loss: f64,
    pub spike_detected: bool,
    pub trace_dipped: bool,
    pub trace_recovered: bool,
}

#[derive(Debug, Clone)]
pub struct CatapultOutcome {
    pub table: ResultTable,
    pub record: TrajectoryRecord,
    pub eta_base: f64,
    pub phases: Vec<CatapultPhase>,
}

pub fn run_catapult(spec: &CatapultSpec, seed: u64) -> Result<CatapultOutcome, LabError> {
    let root = RngStream::new(seed, 0);
    let (mlp, x0) = build_model(&spec.base, &root)?;
    let (eta_base, _) = resolve_eta(&spec.base, &mlp, &x0, &root)?;
    let schedule: Vec<EtaPhase> = spec
        .schedule
        .iter()
        .map(|p| EtaPhase { start_step: p.start_step, eta: eta_base * p.eta_scale })
        .collect();
    let outcome = run_training(&spec.base, &root, eta_base, &schedule)?;
    let record = &outcome.record;

    let mut table = outcome.table.clone();
    let mut phases = Vec::new();
    for (k, phase) in schedule.iter().enumerate() {
        let s = phase.start_step;
        let eta_new = phase.eta;
        let next_switch = schedule.get(k + 1).map(|p| p.start_step).unwrap_or(usize::MAX);
        let pre = record.steps.iter().find(|l| l.step == s).map(|l| l.loss);
        let Some(pre_switch_loss) = pre else { continue };
        let window_end = s + spec.spike_window;
        let peak_loss = record
            .steps
            .iter()
            .filter(|l| l.step > s && l.step <= window_end)
            .map(|l| l.loss)
            .fold(f64::NEG_INFINITY, f64::max);
        let spike_detected = peak_loss >= 2.0 * pre_switch_loss;

        let threshold_new = 2.0 / eta_new;
        let window: Vec<&CurvatureSnapshot> = record
            .snapshots
            .iter()
            .filter(|sn| sn.step > s && sn.step < next_switch)
            .collect();
        let (trace_dipped, trace_recovered) = if window.is_empty() {
            (false, false)
        } else {
            let min_tr = window.iter().map(|sn| sn.trace).fold(f64::INFINITY, f64::min);
            let last_tr = window.last().unwrap().trace;
            (min_tr < threshold_new, last_tr > min_tr)
        };

        let point = format!("phase={k}");
        table.push(Row::new(&point, "switch_step", s as f64));
        table.push(Row::new(&point, "eta_new", eta_new));
        table.push(Row::new(&point, "pre_switch_loss", pre_switch_loss));
        table.push(Row::new(&point, "peak_loss", peak_loss));
        table.push(Row::new(&point, "spike_detected", spike_detected as u8 as f64));
        table.push(Row::new(&point, "trace_dipped", trace_dipped as u8 as f64));
        table.push(Row::new(&point, "trace_recovered", trace_recovered as u8 as f64));
        phases.push(CatapultPhase {
            start_step: s,
            eta_new,
            pre_switch_loss,
            peak_loss,
            spike_detected,
            trace_dipped,
            trace_recovered,
        });
    }
    Ok(CatapultOutcome { table, record: outcome.record, eta_base, phases })
}

/// Shared trainer; every training-style experiment funnels through this so
/// the stream discipline (and therefore bit-exact reproducibility) is
/// identical across subcommands.
fn run_training(
    spec: &EosSpec,
    root: &RngStream,
    eta: f64,
    schedule: &[EtaPhase],
) -> Result<EosOutcome, LabError> {
    let (mlp, x0) = build_model(spec, root)?;
    let cfg = optimizer_config(spec, eta)?;
    let source = match &spec.estimator {
        Some(est) if cfg.is_zeroth_order() => GradientSource::Estimated(est.to_config()?),
        _ => GradientSource::Exact,
    };
    let mut opts = TrajectoryOptions::new(spec.steps);
    opts.curvature_every = Some(spec.cadence);
    opts.power_iters = spec.power_iters;
    opts.trace_probes = spec.trace_probes;
    opts.relcomm_probes = spec.relcomm_probes;
    opts.divergence_cutoff = spec.divergence_cutoff;
    opts.eta_schedule = schedule.to_vec();
    let record = run_trajectory(&cfg, &source, &mlp, x0, &opts, &root.substream(STREAM_TRAIN))?;
    let (table, threshold, median_trace, median_lambda) = tabulate_eos("run", spec, eta, &record);
    Ok(EosOutcome {
        table,
        diverged: record.diverged,
        record,
        eta,
        threshold,
        median_trace,
        median_lambda,
    })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

pub fn run_mu_sweep(spec: &MuSweepSpec, seed: u64) -> Result<ResultTable, LabError> {
    let outcomes: Vec<Result<ResultTable, LabError>> = spec
        .mu_grid
        .par_iter()
        .map(|&mu| {
            let mut point_spec = spec.base.clone();
            if let Some(est) = &mut point_spec.estimator {
                est.mu = mu;
            }
            let outcome = run_eos_track(&point_spec, seed)?;
            let point = format!("mu={mu}");
            let mut table = ResultTable::new();
            relabel_into(&mut table, &outcome.table, &point);
            Ok(table)
        })
        .collect();
    let mut table = ResultTable::new();
    for t in outcomes {
        table.extend(t?.rows);
    }
    Ok(table)
}

pub fn run_batch_sweep(spec: &BatchSweepSpec, seed: u64) -> Result<ResultTable, LabError> {
    let outcomes: Vec<Result<ResultTable, LabError>> = spec
        .batch_grid
        .par_iter()
        .map(|&batch| {
            let full = batch == 0 || batch == spec.base.objective.dataset_samples;
            let point = if full { "batch=full".to_string() } else { format!("batch={batch}") };
            let outcome = if full {
                // Same code path as the eos_track experiment.
                run_eos_track(&spec.base, seed)?
            } else {
                run_minibatch(&spec.base, seed, batch)?
            };
            let mut table = ResultTable::new();
            relabel_into(&mut table, &outcome.table, &point);
            Ok(table)
        })
        .collect();
    let mut table = ResultTable::new();
    for t in outcomes {
        table.extend(t?.rows);
    }
    Ok(table)
}

fn relabel_into(dst: &mut ResultTable, src: &ResultTable, point: &str) {
    for row in &src.rows {
        let mut row = row.clone();
        row.point = point.to_string();
        dst.push(row);
    }
}

/// Mini-batch ZO training loop: the estimator sees a fresh uniform subsample
/// each step, while loss logging and curvature probes stay full-batch. The
/// stream layout mirrors the full-batch trajectory runner, with batch draws
/// on their own substream.
fn run_minibatch(spec: &EosSpec, seed: u64, batch: usize) -> Result<EosOutcome, LabError> {
    let root = RngStream::new(seed, 0);
    let (mlp, x0) = build_model(spec, &root)?;
    let (eta, _) = resolve_eta(spec, &mlp, &x0, &root)?;
    let cfg = optimizer_config(spec, eta)?;
    let est = spec
        .estimator
        .as_ref()
        .ok_or_else(|| LabError::InvalidConfig("estimator required for mini-batch runs".into()))?
        .to_config()?;

    let train = root.substream(STREAM_TRAIN);
    let est_root = train.substream(1);
    let probe_root = train.substream(2);
    let batch_root = train.substream(STREAM_BATCH);
    let n = mlp.dataset().n;

    let mut state = OptimizerState::init(&cfg, x0);
    let mut record = TrajectoryRecord {
        steps: Vec::with_capacity(spec.steps + 1),
        snapshots: Vec::new(),
        final_state: state.clone(),
        diverged: false,
        diverged_at: None,
        estimator_evals: 0,
    };
    for t in 0..=spec.steps {
        let loss = mlp.value(&state.x)?;
        record.steps.push(zo_core::optimizer::StepLog { step: t, loss, eta });
        if !loss.is_finite() || loss > spec.divergence_cutoff {
            record.diverged = true;
            record.diverged_at = Some(t);
            break;
        }
        if t % spec.cadence == 0 {
            let mut snap = zo_core::curvature::probe_curvature(
                &mlp,
                &state.x,
                spec.trace_probes,
                spec.power_iters,
                &probe_root.substream(t as u64).substream(0),
            )?;
            snap.step = t;
            record.snapshots.push(snap);
        }
        if t == spec.steps {
            break;
        }
        let mut batch_rng = batch_root.substream(t as u64).rng();
        let rows = rand::seq::index::sample(&mut batch_rng, n, batch).into_vec();
        let view = mlp.batch_view(&rows);
        let mut est_rng = est_root.substream(t as u64).rng();
        let sample = estimate_gradient_with(&est, &view, &state.x, &mut est_rng)?;
        record.estimator_evals += sample.evals;
        state = step(&cfg, &state, &sample.estimate)?;
    }
    record.final_state = state;
    let (table, threshold, median_trace, median_lambda) = tabulate_eos("run", spec, eta, &record);
    Ok(EosOutcome {
        table,
        diverged: record.diverged,
        record,
        eta,
        threshold,
        median_trace,
        median_lambda,
    })
}
