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

//! JSON experiment configuration. The schema is versioned
//! (`spec_version: 1`), unknown fields are rejected, and every out-of-range
//! hyperparameter is caught at load time with the offending field named.

use std::path::Path;

use serde::{Deserialize, Serialize};

use zo_core::estimator::{EstimatorConfig, EstimatorKind};
use zo_core::linalg::Spectrum;
use zo_core::mlp::Activation;
use zo_core::objective::DatasetKind;
use zo_core::optimizer::{OptimizerConfig, Precond};
use zo_core::stability::{StabilityFamily, StabilityQuery};

use crate::LabError;

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub spec_version: u32,
    pub seed: u64,
    pub experiment: ExperimentSpec,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, LabError> {
        let cfg: ConfigFile = serde_json::from_str(text)?;
        if cfg.spec_version != SPEC_VERSION {
            return Err(LabError::InvalidConfig(format!(
                "spec_version: expected {SPEC_VERSION}, got {}",
                cfg.spec_version
            )));
        }
        cfg.experiment.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    ThresholdTable(ThresholdSpec),
    Rho(RhoSpec),
    McStability(McStabilitySpec),
    EosTrack(EosSpec),
    Catapult(CatapultSpec),
    MuSweep(MuSweepSpec),
    BatchSweep(BatchSweepSpec),
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), LabError> {
        match self {
            ExperimentSpec::ThresholdTable(s) => s.validate(),
            ExperimentSpec::Rho(s) => s.validate(),
            ExperimentSpec::McStability(s) => s.validate(),
            ExperimentSpec::EosTrack(s) => s.validate(),
            ExperimentSpec::Catapult(s) => s.validate(),
            ExperimentSpec::MuSweep(s) => s.validate(),
            ExperimentSpec::BatchSweep(s) => s.validate(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ExperimentSpec::ThresholdTable(_) => "threshold_table",
            ExperimentSpec::Rho(_) => "rho",
            ExperimentSpec::McStability(_) => "mc_stability",
            ExperimentSpec::EosTrack(_) => "eos_track",
            ExperimentSpec::Catapult(_) => "catapult",
            ExperimentSpec::MuSweep(_) => "mu_sweep",
            ExperimentSpec::BatchSweep(_) => "batch_sweep",
        }
    }
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    ZoGd,
    ZoGdm,
    FrozenZoAdam,
    Gd,
    Gdm,
    FrozenAdam,
}

impl FamilyTag {
    pub fn to_stability_family(self, momentum: f64) -> Result<StabilityFamily, LabError> {
        let fam = match self {
            FamilyTag::ZoGd => StabilityFamily::ZoGd,
            FamilyTag::ZoGdm => StabilityFamily::ZoGdm { beta: momentum },
            FamilyTag::FrozenZoAdam => StabilityFamily::FrozenZoAdam { beta1: momentum },
            FamilyTag::Gd => StabilityFamily::Gd,
            FamilyTag::Gdm => StabilityFamily::Gdm { beta: momentum },
            FamilyTag::FrozenAdam => StabilityFamily::FrozenAdam { beta1: momentum },
        };
        fam.validate().map_err(|e| LabError::InvalidConfig(format!("momentum: {e}")))?;
        Ok(fam)
    }

    pub fn is_zeroth_order(self) -> bool {
        matches!(self, FamilyTag::ZoGd | FamilyTag::ZoGdm | FamilyTag::FrozenZoAdam)
    }
}

fn default_momentum() -> f64 {
    0.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub family: FamilyTag,
    pub spectrum: Vec<f64>,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_eta: Option<f64>,
}

impl QuerySpec {
    pub fn to_query(&self) -> Result<StabilityQuery, LabError> {
        let spectrum = Spectrum::new(self.spectrum.clone())
            .map_err(|e| LabError::InvalidConfig(format!("spectrum: {e}")))?;
        StabilityQuery::new(spectrum, self.family.to_stability_family(self.momentum)?)
            .map_err(|e| LabError::InvalidConfig(format!("query: {e}")))
    }

    fn validate(&self) -> Result<(), LabError> {
        self.to_query()?;
        if let Some(eta) = self.probe_eta {
            if !(eta > 0.0) {
                return Err(LabError::InvalidConfig(format!("probe_eta must be > 0, got {eta}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKindTag {
    CentralGaussian,
    ForwardGaussian,
    CentralSphere,
    MultiQueryGaussian,
}

fn default_mu() -> f64 {
    zo_core::estimator::DEFAULT_MU
}

fn default_queries() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub kind: EstimatorKindTag,
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Queries per estimate; only used by `multi_query_gaussian`.
    #[serde(default = "default_queries")]
    pub queries: usize,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self { kind: EstimatorKindTag::CentralGaussian, mu: default_mu(), queries: 1 }
    }
}

impl EstimatorSpec {
    pub fn to_config(&self) -> Result<EstimatorConfig, LabError> {
        let kind = match self.kind {
            EstimatorKindTag::CentralGaussian => EstimatorKind::CentralGaussian,
            EstimatorKindTag::ForwardGaussian => EstimatorKind::ForwardGaussian,
            EstimatorKindTag::CentralSphere => EstimatorKind::CentralSphere,
            EstimatorKindTag::MultiQueryGaussian => EstimatorKind::MultiQueryGaussian(self.queries),
        };
        EstimatorConfig::new(kind, self.mu)
            .map_err(|e| LabError::InvalidConfig(format!("estimator: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub family: FamilyTag,
    /// Explicit step size; omit when an `eta_rule` sets it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Second-moment decay for ZO-Adam (unused elsewhere).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Fixed diagonal preconditioner for the frozen Adam families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precond_diag: Option<Vec<f64>>,
}

impl OptimizerSpec {
    pub fn to_config(&self, eta: f64) -> Result<OptimizerConfig, LabError> {
        let cfg = match self.family {
            FamilyTag::ZoGd => OptimizerConfig::ZoGd { eta },
            FamilyTag::Gd => OptimizerConfig::Gd { eta },
            FamilyTag::ZoGdm => OptimizerConfig::ZoGdm { eta, beta: self.momentum },
            FamilyTag::Gdm => OptimizerConfig::Gdm { eta, beta: self.momentum },
            FamilyTag::FrozenZoAdam | FamilyTag::FrozenAdam => {
                let diag = self.precond_diag.clone().ok_or_else(|| {
                    LabError::InvalidConfig("precond_diag is required for frozen Adam".into())
                })?;
                let precond = Precond::Diagonal(diag);
                if self.family == FamilyTag::FrozenZoAdam {
                    OptimizerConfig::FrozenZoAdam { eta, beta1: self.momentum, precond }
                } else {
                    OptimizerConfig::FrozenAdam { eta, beta1: self.momentum, precond }
                }
            }
        };
        cfg.validate().map_err(|e| LabError::InvalidConfig(format!("optimizer: {e}")))?;
        Ok(cfg)
    }

    /// ZO-Adam gets its own constructor since it is not frozen.
    pub fn to_adam_config(&self, eta: f64) -> Result<OptimizerConfig, LabError> {
        let cfg = OptimizerConfig::ZoAdam {
            eta,
            beta1: self.momentum,
            beta2: self.beta2.unwrap_or(0.999),
            eps: self.eps.unwrap_or(1e-8),
        };
        cfg.validate().map_err(|e| LabError::InvalidConfig(format!("optimizer: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationTag {
    Tanh,
    Gelu,
}

impl From<ActivationTag> for Activation {
    fn from(t: ActivationTag) -> Self {
        match t {
            ActivationTag::Tanh => Activation::Tanh,
            ActivationTag::Gelu => Activation::Gelu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKindTag {
    GaussianClusters,
    TeacherMlp,
}

impl From<DatasetKindTag> for DatasetKind {
    fn from(t: DatasetKindTag) -> Self {
        match t {
            DatasetKindTag::GaussianClusters => DatasetKind::GaussianClusters,
            DatasetKindTag::TeacherMlp => DatasetKind::TeacherMlp,
        }
    }
}

fn default_init_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Layer widths, input first. Input width must match `dataset_features`,
    /// output width the number of target columns.
    pub widths: Vec<usize>,
    pub activation: ActivationTag,
    pub dataset_kind: DatasetKindTag,
    pub dataset_samples: usize,
    /// Weight init scale (gain over 1/sqrt(fan_in)).
    #[serde(default = "default_init_gain")]
    pub init_gain: f64,
    /// Load the dataset from CSV instead of synthesizing it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_csv: Option<String>,
}

impl MlpSpec {
    fn validate(&self) -> Result<(), LabError> {
        if self.widths.len() < 2 {
            return Err(LabError::InvalidConfig("widths: need at least [input, output]".into()));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(LabError::InvalidConfig("widths: all layer widths must be >= 1".into()));
        }
        if self.dataset_samples == 0 {
            return Err(LabError::InvalidConfig("dataset_samples must be >= 1".into()));
        }
        if !(self.init_gain > 0.0) {
            return Err(LabError::InvalidConfig(format!(
                "init_gain must be > 0, got {}",
                self.init_gain
            )));
        }
        Ok(())
    }
}

/// How the step size is fixed for a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaRule {
    /// Use this step size as given.
    Fixed { eta: f64 },
    /// Choose eta so `Tr(H_0) = fraction * (2 / eta)` at initialization.
    TraceFraction { fraction: f64 },
    /// Choose eta so `lambda_max(H_0) = fraction * (2 / eta)`.
    LambdaFraction { fraction: f64 },
}

impl EtaRule {
    fn validate(&self) -> Result<(), LabError> {
        match self {
            EtaRule::Fixed { eta } => {
                if !(*eta > 0.0) {
                    return Err(LabError::InvalidConfig(format!("eta must be > 0, got {eta}")));
                }
            }
            EtaRule::TraceFraction { fraction } | EtaRule::LambdaFraction { fraction } => {
                if !(*fraction > 0.0) {
                    return Err(LabError::InvalidConfig(format!(
                        "fraction must be > 0, got {fraction}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn default_cadence() -> usize {
    100
}

fn default_power_iters() -> usize {
    zo_core::curvature::DEFAULT_POWER_ITERS
}

fn default_trace_probes() -> usize {
    zo_core::curvature::DEFAULT_TRACE_PROBES
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EosSpec {
    pub objective: MlpSpec,
    pub optimizer: OptimizerSpec,
    /// Absent for first-order (exact-gradient) runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<EstimatorSpec>,
    pub eta_rule: EtaRule,
    pub steps: usize,
    #[serde(default = "default_cadence")]
    pub cadence: usize,
    #[serde(default = "default_power_iters")]
    pub power_iters: usize,
    #[serde(default = "default_trace_probes")]
    pub trace_probes: usize,
    /// Log the relative commutator (Adam runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relcomm_probes: Option<usize>,
    /// Use the bias-corrected (non-frozen) ZO-Adam update.
    #[serde(default)]
    pub adam: bool,
    /// Loss level that truncates the run with the divergence flag.
    #[serde(default = "default_divergence_cutoff")]
    pub divergence_cutoff: f64,
}

fn default_divergence_cutoff() -> f64 {
    1e12
}

impl EosSpec {
    pub fn validate(&self) -> Result<(), LabError> {
        self.objective.validate()?;
        self.eta_rule.validate()?;
        if self.steps == 0 {
            return Err(LabError::InvalidConfig("steps must be >= 1".into()));
        }
        if self.cadence == 0 {
            return Err(LabError::InvalidConfig("cadence must be >= 1".into()));
        }
        if self.cadence != 1 && self.steps % self.cadence != 0 {
            return Err(LabError::InvalidConfig(format!(
                "cadence {} must divide steps {} (or be 1)",
                self.cadence, self.steps
            )));
        }
        if self.optimizer.family.is_zeroth_order() && self.estimator.is_none() {
            return Err(LabError::InvalidConfig(
                "estimator is required for zeroth-order optimizers".into(),
            ));
        }
        if let Some(est) = &self.estimator {
            est.to_config()?;
        }
        // Dry-run the optimizer construction with a placeholder step size.
        if self.adam {
            self.optimizer.to_adam_config(1.0)?;
        } else if !matches!(self.optimizer.family, FamilyTag::FrozenZoAdam | FamilyTag::FrozenAdam) {
            self.optimizer.to_config(1.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub queries: Vec<QuerySpec>,
}

impl ThresholdSpec {
    fn validate(&self) -> Result<(), LabError> {
        if self.queries.is_empty() {
            return Err(LabError::InvalidConfig("queries must be nonempty".into()));
        }
        for q in &self.queries {
            q.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSpec {
    pub family: FamilyTag,
    pub spectrum: Vec<f64>,
    pub eta: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    /// Preconditioner eigenvalues (frozen ZO-Adam only), aligned with the
    /// descending spectrum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default)]
    pub estimator_variant: VariantTag,
    /// Queries for the multi-query variant.
    #[serde(default = "default_queries")]
    pub queries: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantTag {
    #[default]
    Gaussian,
    Sphere,
    MultiQuery,
}

impl RhoSpec {
    fn validate(&self) -> Result<(), LabError> {
        if !self.family.is_zeroth_order() {
            return Err(LabError::InvalidConfig(
                "family: rho is defined for zeroth-order families".into(),
            ));
        }
        if !(self.eta > 0.0) {
            return Err(LabError::InvalidConfig(format!("eta must be > 0, got {}", self.eta)));
        }
        Spectrum::new(self.spectrum.clone())
            .map_err(|e| LabError::InvalidConfig(format!("spectrum: {e}")))?;
        self.family.to_stability_family(self.momentum)?;
        if self.family == FamilyTag::FrozenZoAdam && self.sigma.is_none() {
            return Err(LabError::InvalidConfig("sigma is required for frozen_zo_adam".into()));
        }
        if self.queries == 0 {
            return Err(LabError::InvalidConfig("queries must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McStabilitySpec {
    pub family: FamilyTag,
    pub spectrum: Vec<f64>,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    pub eta_grid: Vec<f64>,
    pub x0: Vec<f64>,
    pub steps: usize,
    pub replicates: usize,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    /// Replicate groups used for the growth-rate standard error.
    #[serde(default = "default_groups")]
    pub groups: usize,
}

fn default_groups() -> usize {
    10
}

impl McStabilitySpec {
    fn validate(&self) -> Result<(), LabError> {
        Spectrum::new(self.spectrum.clone())
            .map_err(|e| LabError::InvalidConfig(format!("spectrum: {e}")))?;
        self.family.to_stability_family(self.momentum)?;
        if self.eta_grid.is_empty() {
            return Err(LabError::InvalidConfig("eta_grid must be nonempty".into()));
        }
        if self.eta_grid.iter().any(|&e| !(e > 0.0)) {
            return Err(LabError::InvalidConfig("eta_grid entries must be > 0".into()));
        }
        if self.x0.len() != self.spectrum.len() {
            return Err(LabError::InvalidConfig(format!(
                "x0 length {} must match spectrum length {}",
                self.x0.len(),
                self.spectrum.len()
            )));
        }
        if self.steps < 2 {
            return Err(LabError::InvalidConfig("steps must be >= 2".into()));
        }
        if self.family.is_zeroth_order() {
            if self.replicates < 2 * self.groups {
                return Err(LabError::InvalidConfig(format!(
                    "replicates {} must be at least 2 * groups ({})",
                    self.replicates,
                    2 * self.groups
                )));
            }
            self.estimator.to_config()?;
        }
        if self.groups < 2 {
            return Err(LabError::InvalidConfig("groups must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatapultSpec {
    #[serde(flatten)]
    pub base: EosSpec,
    /// Step-size scale factors applied at the given steps, e.g.
    /// `[{"start_step": 1000, "eta_scale": 2.0}]`.
    pub schedule: Vec<SchedulePoint>,
    /// Window after each switch inside which the loss spike is sought.
    #[serde(default = "default_spike_window")]
    pub spike_window: usize,
}

fn default_spike_window() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulePoint {
    pub start_step: usize,
    pub eta_scale: f64,
}

impl CatapultSpec {
    fn validate(&self) -> Result<(), LabError> {
        self.base.validate()?;
        if self.schedule.is_empty() {
            return Err(LabError::InvalidConfig("schedule must be nonempty".into()));
        }
        let mut last = 0usize;
        for (i, p) in self.schedule.iter().enumerate() {
            if p.start_step == 0 || p.start_step >= self.base.steps {
                return Err(LabError::InvalidConfig(format!(
                    "schedule[{i}].start_step must be inside (0, steps)"
                )));
            }
            if p.start_step <= last && i > 0 {
                return Err(LabError::InvalidConfig("schedule must be strictly increasing".into()));
            }
            if !(p.eta_scale > 0.0) {
                return Err(LabError::InvalidConfig(format!(
                    "schedule[{i}].eta_scale must be > 0"
                )));
            }
            last = p.start_step;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSweepSpec {
    #[serde(flatten)]
    pub base: EosSpec,
    pub mu_grid: Vec<f64>,
}

impl MuSweepSpec {
    fn validate(&self) -> Result<(), LabError> {
        self.base.validate()?;
        if self.base.estimator.is_none() {
            return Err(LabError::InvalidConfig("mu sweep requires an estimator".into()));
        }
        if self.mu_grid.is_empty() || self.mu_grid.iter().any(|&m| !(m > 0.0)) {
            return Err(LabError::InvalidConfig("mu_grid must be nonempty and positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSweepSpec {
    #[serde(flatten)]
    pub base: EosSpec,
    /// Batch sizes; `0` denotes full batch.
    pub batch_grid: Vec<usize>,
}

impl BatchSweepSpec {
    fn validate(&self) -> Result<(), LabError> {
        self.base.validate()?;
        if self.batch_grid.is_empty() {
            return Err(LabError::InvalidConfig("batch_grid must be nonempty".into()));
        }
        for &b in &self.batch_grid {
            if b > self.base.objective.dataset_samples {
                return Err(LabError::InvalidConfig(format!(
                    "batch size {b} exceeds dataset_samples {}",
                    self.base.objective.dataset_samples
                )));
            }
        }
        Ok(())
    }
}
