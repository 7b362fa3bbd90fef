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

//! Optimizers as pure step functions over explicit state, plus the
//! trajectory runner that drives training and logging.
//!
//! Zeroth-order and first-order variants share the same update rules; only
//! the gradient source differs. ZO-Adam maintains the bias-corrected
//! preconditioner `P_{t+1} = (1 - b1^{t+1}) [diag(sqrt(nu_{t+1} / (1 -
//! b2^{t+1}))) + eps I]` and steps `x <- x - eta P^{-1} m`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curvature::{self, CurvatureSnapshot};
use crate::error::{CoreError, Result};
use crate::estimator::{estimate_gradient_with, EstimatorConfig};
use crate::linalg::{self, SymMatrix};
use crate::math;
use crate::objective::Objective;
use crate::rng::RngStream;

/// Fixed preconditioner for the frozen Adam variants.
#[derive(Debug, Clone)]
pub enum Precond {
    Diagonal(Vec<f64>),
    Dense(SymMatrix),
}

impl Precond {
    fn validate(&self) -> Result<()> {
        match self {
            Precond::Diagonal(d) => {
                if d.is_empty() || d.iter().any(|&p| !(p > 0.0)) {
                    return Err(CoreError::InvalidParameter(
                        "preconditioner diagonal must be positive".into(),
                    ));
                }
            }
            Precond::Dense(m) => {
                let eig = linalg::sym_eigendecompose(m)?;
                if eig.values.iter().any(|&v| !(v > 0.0)) {
                    return Err(CoreError::InvalidParameter("preconditioner must be SPD".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Precond::Diagonal(d) => d.len(),
            Precond::Dense(m) => m.dim(),
        }
    }

    /// `P^{-1} v`.
    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Precond::Diagonal(d) => Ok(v.iter().zip(d).map(|(x, p)| x / p).collect()),
            Precond::Dense(m) => linalg::solve_linear_small(&m.to_mat(), v),
        }
    }
}

#[derive(Debug, Clone)]
pub enum OptimizerConfig {
    ZoGd { eta: f64 },
    ZoGdm { eta: f64, beta: f64 },
    ZoAdam { eta: f64, beta1: f64, beta2: f64, eps: f64 },
    FrozenZoAdam { eta: f64, beta1: f64, precond: Precond },
    Gd { eta: f64 },
    Gdm { eta: f64, beta: f64 },
    FrozenAdam { eta: f64, beta1: f64, precond: Precond },
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let check_eta = |eta: f64| {
            if !(eta > 0.0) {
                Err(CoreError::InvalidParameter(format!("eta must be > 0, got {eta}")))
            } else {
                Ok(())
            }
        };
        let check_beta = |name: &str, b: f64| {
            if !(0.0..1.0).contains(&b) {
                Err(CoreError::InvalidParameter(format!("{name} must be in [0, 1), got {b}")))
            } else {
                Ok(())
            }
        };
        match self {
            OptimizerConfig::ZoGd { eta } | OptimizerConfig::Gd { eta } => check_eta(*eta),
            OptimizerConfig::ZoGdm { eta, beta } | OptimizerConfig::Gdm { eta, beta } => {
                check_eta(*eta)?;
                check_beta("beta", *beta)
            }
            OptimizerConfig::ZoAdam { eta, beta1, beta2, eps } => {
                check_eta(*eta)?;
                check_beta("beta1", *beta1)?;
                check_beta("beta2", *beta2)?;
                if !(*eps > 0.0) {
                    return Err(CoreError::InvalidParameter(format!("eps must be > 0, got {eps}")));
                }
                Ok(())
            }
            OptimizerConfig::FrozenZoAdam { eta, beta1, precond }
            | OptimizerConfig::FrozenAdam { eta, beta1, precond } => {
                check_eta(*eta)?;
                check_beta("beta1", *beta1)?;
                precond.validate()
            }
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            OptimizerConfig::ZoGd { eta }
            | OptimizerConfig::ZoGdm { eta, .. }
            | OptimizerConfig::ZoAdam { eta, .. }
            | OptimizerConfig::FrozenZoAdam { eta, .. }
            | OptimizerConfig::Gd { eta }
            | OptimizerConfig::Gdm { eta, .. }
            | OptimizerConfig::FrozenAdam { eta, .. } => *eta,
        }
    }

    /// Same optimizer with a different step size (piecewise schedules).
    pub fn with_eta(&self, new_eta: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            OptimizerConfig::ZoGd { eta }
            | OptimizerConfig::ZoGdm { eta, .. }
            | OptimizerConfig::ZoAdam { eta, .. }
            | OptimizerConfig::FrozenZoAdam { eta, .. }
            | OptimizerConfig::Gd { eta }
            | OptimizerConfig::Gdm { eta, .. }
            | OptimizerConfig::FrozenAdam { eta, .. } => *eta = new_eta,
        }
        out
    }

    /// True for the estimator-driven variants.
    pub fn is_zeroth_order(&self) -> bool {
        matches!(
            self,
            OptimizerConfig::ZoGd { .. }
                | OptimizerConfig::ZoGdm { .. }
                | OptimizerConfig::ZoAdam { .. }
                | OptimizerConfig::FrozenZoAdam { .. }
        )
    }

    fn uses_nu(&self) -> bool {
        matches!(self, OptimizerConfig::ZoAdam { .. })
    }
}

/// Explicit optimizer state; `step` produces the successor state.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub nu: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    /// Fresh state at `x0` with `m = 0`, `nu = 0`, `t = 0`.
    pub fn init(cfg: &OptimizerConfig, x0: Vec<f64>) -> Self {
        let d = x0.len();
        let nu = if cfg.uses_nu() { vec![0.0; d] } else { Vec::new() };
        Self { x: x0, m: vec![0.0; d], nu, t: 0 }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// One optimizer update with the supplied gradient (exact or estimated).
/// A non-finite gradient is rejected and the state left untouched.
pub fn step(cfg: &OptimizerConfig, state: &OptimizerState, g: &[f64]) -> Result<OptimizerState> {
    let d = state.dim();
    if g.len() != d {
        return Err(CoreError::DimMismatch { expected: d, got: g.len(), what: "gradient" });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite("gradient".into()));
    }
    let mut next = state.clone();
    next.t = state.t + 1;
    match cfg {
        OptimizerConfig::ZoGd { eta } | OptimizerConfig::Gd { eta } => {
            linalg::axpy(&mut next.x, -eta, g);
        }
        OptimizerConfig::ZoGdm { eta, beta } | OptimizerConfig::Gdm { eta, beta } => {
            for i in 0..d {
                next.m[i] = beta * state.m[i] + g[i];
            }
            let m = next.m.clone();
            linalg::axpy(&mut next.x, -eta, &m);
        }
        OptimizerConfig::ZoAdam { eta, beta1, beta2, eps } => {
            let t1 = state.t as i32 + 1;
            for i in 0..d {
                next.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
                next.nu[i] = beta2 * state.nu[i] + (1.0 - beta2) * g[i] * g[i];
            }
            let bc1 = 1.0 - math::powi(*beta1, t1);
            let bc2 = 1.0 - math::powi(*beta2, t1);
            for i in 0..d {
                let p = bc1 * (math::sqrt(next.nu[i] / bc2) + eps);
                next.x[i] -= eta * next.m[i] / p;
            }
        }
        OptimizerConfig::FrozenZoAdam { eta, beta1, precond }
        | OptimizerConfig::FrozenAdam { eta, beta1, precond } => {
            for i in 0..d {
                next.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g[i];
            }
            let pm = precond.apply_inverse(&next.m)?;
            linalg::axpy(&mut next.x, -eta, &pm);
        }
    }
    Ok(next)
}

/// Preconditioner the next update would apply given the current second-moment
/// state: `(1 - b1^{t+1}) [diag(sqrt(nu / (1 - b2^{t+1}))) + eps I]` for
/// ZO-Adam, the configured fixed `P` for the frozen variants.
pub fn current_preconditioner(cfg: &OptimizerConfig, state: &OptimizerState) -> Result<Precond> {
    match cfg {
        OptimizerConfig::ZoAdam { beta1, beta2, eps, .. } => {
            let t1 = state.t as i32 + 1;
            let bc1 = 1.0 - math::powi(*beta1, t1);
            let bc2 = 1.0 - math::powi(*beta2, t1);
            let diag = state
                .nu
                .iter()
                .map(|&nu| bc1 * (math::sqrt(nu / bc2) + eps))
                .collect();
            Ok(Precond::Diagonal(diag))
        }
        OptimizerConfig::FrozenZoAdam { precond, .. } | OptimizerConfig::FrozenAdam { precond, .. } => {
            Ok(precond.clone())
        }
        _ => Err(CoreError::InvalidParameter(
            "preconditioner is only defined for Adam-family optimizers".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Trajectory runner
// ---------------------------------------------------------------------------

/// Where step directions come from.
#[derive(Debug, Clone)]
pub enum GradientSource {
    /// Exact gradients (first-order training).
    Exact,
    /// Two-point estimates drawn per step.
    Estimated(EstimatorConfig),
}

/// Piecewise-constant step-size phase starting at `start_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPhase {
    pub start_step: usize,
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryOptions {
    pub steps: usize,
    /// Curvature snapshot cadence; `None` disables probing.
    pub curvature_every: Option<usize>,
    pub power_iters: usize,
    pub trace_probes: usize,
    /// Log the relative commutator (Adam runs) with this many probes.
    pub relcomm_probes: Option<usize>,
    /// Loss threshold that raises the divergence flag.
    pub divergence_cutoff: f64,
    /// Step-size schedule; empty means the configured eta throughout.
    pub eta_schedule: Vec<EtaPhase>,
}

impl TrajectoryOptions {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            curvature_every: None,
            power_iters: curvature::DEFAULT_POWER_ITERS,
            trace_probes: curvature::DEFAULT_TRACE_PROBES,
            relcomm_probes: None,
            divergence_cutoff: 1e12,
            eta_schedule: Vec::new(),
        }
    }

    fn eta_at(&self, base: f64, step: usize) -> f64 {
        let mut eta = base;
        for phase in &self.eta_schedule {
            if step >= phase.start_step {
                eta = phase.eta;
            }
        }
        eta
    }
}

/// Loss at the pre-step iterate, with the step size in force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub steps: Vec<StepLog>,
    pub snapshots: Vec<CurvatureSnapshot>,
    pub final_state: OptimizerState,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
    /// Objective evaluations consumed by the estimator (loss logging and
    /// curvature probes not included).
    pub estimator_evals: usize,
}

const TAG_ESTIMATOR: u64 = 1;
const TAG_PROBES: u64 = 2;

/// Runs `steps` updates from `x0`, logging loss every step and curvature
/// snapshots at the configured cadence. Deterministic given
/// `(configs, x0, stream)`. Stops early with the divergence flag when the
/// loss exceeds the cutoff or turns non-finite.
pub fn run_trajectory<O: Objective + ?Sized>(
    cfg: &OptimizerConfig,
    source: &GradientSource,
    obj: &O,
    x0: Vec<f64>,
    opts: &TrajectoryOptions,
    stream: &RngStream,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if opts.steps == 0 {
        return Err(CoreError::InvalidParameter("trajectory needs steps >= 1".into()));
    }
    let est_root = stream.substream(TAG_ESTIMATOR);
    let probe_root = stream.substream(TAG_PROBES);
    let mut state = OptimizerState::init(cfg, x0);
    let mut record = TrajectoryRecord {
        steps: Vec::with_capacity(opts.steps + 1),
        snapshots: Vec::new(),
        final_state: state.clone(),
        diverged: false,
        diverged_at: None,
        estimator_evals: 0,
    };

    for t in 0..=opts.steps {
        let eta_t = opts.eta_at(cfg.eta(), t);
        let loss = obj.value(&state.x)?;
        record.steps.push(StepLog { step: t, loss, eta: eta_t });
        if !loss.is_finite() || loss > opts.divergence_cutoff {
            record.diverged = true;
            record.diverged_at = Some(t);
            break;
        }
        if let Some(every) = opts.curvature_every {
            if t % every.max(1) == 0 {
                let mut snap = probe_snapshot(cfg, obj, &state, opts, &probe_root.substream(t as u64))?;
                snap.step = t;
                record.snapshots.push(snap);
            }
        }
        if t == opts.steps {
            break;
        }

        let cfg_t = cfg.with_eta(eta_t);
        let g = match source {
            GradientSource::Exact => obj.gradient(&state.x)?,
            GradientSource::Estimated(est_cfg) => {
                let mut rng = est_root.substream(t as u64).rng();
                let sample = estimate_gradient_with(est_cfg, obj, &state.x, &mut rng)?;
                record.estimator_evals += sample.evals;
                sample.estimate
            }
        };
        match step(&cfg_t, &state, &g) {
            Ok(next) => state = next,
            Err(CoreError::NonFinite(_)) => {
                record.diverged = true;
                record.diverged_at = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    record.final_state = state;
    Ok(record)
}

fn probe_snapshot<O: Objective + ?Sized>(
    cfg: &OptimizerConfig,
    obj: &O,
    state: &OptimizerState,
    opts: &TrajectoryOptions,
    stream: &RngStream,
) -> Result<CurvatureSnapshot> {
    let mut snap =
        curvature::probe_curvature(obj, &state.x, opts.trace_probes, opts.power_iters, &stream.substream(0))?;
    let precond_diag = match current_preconditioner(cfg, state) {
        Ok(Precond::Diagonal(d)) => Some(d),
        _ => None,
    };
    if let Some(p) = precond_diag {
        let (lam, tr, tr_se) = curvature::probe_preconditioned(
            obj,
            &state.x,
            &p,
            opts.trace_probes,
            opts.power_iters,
            &stream.substream(1),
        )?;
        snap.precond_lambda_max = Some(lam);
        snap.precond_trace = Some(tr);
        snap.precond_trace_se = Some(tr_se);
        if let Some(probes) = opts.relcomm_probes {
            let rc = curvature::relative_commutator(obj, &state.x, &p, probes, &stream.substream(2))?;
            snap.relcomm = rc.ratio;
            snap.relcomm_se = Some(rc.std_error);
        }
    }
    Ok(snap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimatorKind;
    use crate::objective::QuadraticModel;

    fn quad(diag: &[f64]) -> QuadraticModel {
        QuadraticModel::from_diagonal(diag.to_vec(), vec![0.0; diag.len()], 0.0).unwrap()
    }

    #[test]
    fn zo_gd_single_step() {
        let cfg = OptimizerConfig::ZoGd { eta: 0.1 };
        let state = OptimizerState::init(&cfg, vec![1.0]);
        let next = step(&cfg, &state, &[2.0]).unwrap();
        assert_eq!(next.x, vec![0.8]);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn zero_momentum_degenerates_to_gd() {
        let q = quad(&[1.0, 0.5]);
        let est = EstimatorConfig::default();
        let opts = TrajectoryOptions::new(40);
        let stream = RngStream::new(77, 0);
        let a = run_trajectory(
            &OptimizerConfig::ZoGd { eta: 0.2 },
            &GradientSource::Estimated(est),
            &q,
            vec![1.0, -1.0],
            &opts,
            &stream,
        )
        .unwrap();
        let b = run_trajectory(
            &OptimizerConfig::ZoGdm { eta: 0.2, beta: 0.0 },
            &GradientSource::Estimated(est),
            &q,
            vec![1.0, -1.0],
            &opts,
            &stream,
        )
        .unwrap();
        assert_eq!(a.final_state.x, b.final_state.x);
        assert_eq!(a.steps, b.steps);

        let c = run_trajectory(
            &OptimizerConfig::Gd { eta: 0.2 },
            &GradientSource::Exact,
            &q,
            vec![1.0, -1.0],
            &opts,
            &stream,
        )
        .unwrap();
        let d = run_trajectory(
            &OptimizerConfig::Gdm { eta: 0.2, beta: 0.0 },
            &GradientSource::Exact,
            &q,
            vec![1.0, -1.0],
            &opts,
            &stream,
        )
        .unwrap();
        assert_eq!(c.final_state.x, d.final_state.x);
    }

    #[test]
    fn zo_adam_matches_scalar_reimplementation() {
        // Straight-line unroll of the EMA/bias-correction updates in 1-D.
        let (eta, b1, b2, eps) = (0.05, 0.9, 0.99, 1e-8);
        let cfg = OptimizerConfig::ZoAdam { eta, beta1: b1, beta2: b2, eps };
        let gs = [2.0, -1.0, 0.5, 3.0];
        let mut state = OptimizerState::init(&cfg, vec![1.0]);
        let (mut m, mut nu, mut x) = (0.0f64, 0.0f64, 1.0f64);
        for (k, &g) in gs.iter().enumerate() {
            state = step(&cfg, &state, &[g]).unwrap();
            let t1 = (k + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            nu = b2 * nu + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t1));
            let nu_hat = nu / (1.0 - b2.powi(t1));
            x -= eta * m_hat / (nu_hat.sqrt() + eps);
            assert!((state.x[0] - x).abs() <= 1e-14, "step {k}: {} vs {x}", state.x[0]);
        }
    }

    #[test]
    fn first_adam_step_has_unit_scale_signs() {
        // With constant g the first update is x - eta * g / (|g| + eps'),
        // elementwise sign of g.
        let cfg = OptimizerConfig::ZoAdam { eta: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-12 };
        let state = OptimizerState::init(&cfg, vec![0.0, 0.0]);
        let next = step(&cfg, &state, &[3.0, -0.25]).unwrap();
        assert!((next.x[0] + 0.1).abs() < 1e-6);
        assert!((next.x[1] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn preconditioner_at_t0_is_eps_scale() {
        let cfg = OptimizerConfig::ZoAdam { eta: 0.1, beta1: 0.9, beta2: 0.99, eps: 1e-3 };
        let state = OptimizerState::init(&cfg, vec![0.0; 3]);
        match current_preconditioner(&cfg, &state).unwrap() {
            Precond::Diagonal(d) => {
                for v in d {
                    assert!((v - (1.0 - 0.9) * 1e-3).abs() < 1e-18);
                }
            }
            _ => panic!("expected diagonal"),
        }
    }

    #[test]
    fn frozen_preconditioner_returned_unchanged() {
        let p = Precond::Diagonal(vec![2.0, 3.0]);
        let cfg = OptimizerConfig::FrozenZoAdam { eta: 0.1, beta1: 0.5, precond: p };
        let state = OptimizerState::init(&cfg, vec![0.0, 0.0]);
        match current_preconditioner(&cfg, &state).unwrap() {
            Precond::Diagonal(d) => assert_eq!(d, vec![2.0, 3.0]),
            _ => panic!("expected diagonal"),
        }
    }

    #[test]
    fn preconditioner_matches_hand_unrolled_ema() {
        let (b1, b2, eps) = (0.8, 0.95, 1e-6);
        let cfg = OptimizerConfig::ZoAdam { eta: 0.1, beta1: b1, beta2: b2, eps };
        let gs = [[1.0, -2.0], [0.5, 0.5], [-1.5, 3.0]];
        let mut state = OptimizerState::init(&cfg, vec![0.0, 0.0]);
        for g in &gs {
            state = step(&cfg, &state, g).unwrap();
        }
        // nu_3 by direct EMA, exponent t+1 = 4 in the bias corrections.
        let mut nu = [0.0f64; 2];
        for g in &gs {
            for i in 0..2 {
                nu[i] = b2 * nu[i] + (1.0 - b2) * g[i] * g[i];
            }
        }
        match current_preconditioner(&cfg, &state).unwrap() {
            Precond::Diagonal(d) => {
                for i in 0..2 {
                    let expect = (1.0 - b1.powi(4)) * ((nu[i] / (1.0 - b2.powi(4))).sqrt() + eps);
                    assert!((d[i] - expect).abs() <= 1e-15, "{} vs {expect}", d[i]);
                }
            }
            _ => panic!("expected diagonal"),
        }
    }

    #[test]
    fn zo_adam_refrozen_each_step_matches_frozen_variant() {
        let (eta, b1) = (0.05, 0.5);
        let adam = OptimizerConfig::ZoAdam { eta, beta1: b1, beta2: 0.9, eps: 1e-4 };
        let gs = [[1.0, -2.0], [0.5, 0.5], [-1.5, 3.0]];
        let mut a = OptimizerState::init(&adam, vec![0.4, -0.3]);
        let mut f = a.clone();
        for g in &gs {
            // Freeze the Adam preconditioner the upcoming step will apply:
            // nu advances first, so replicate the EMA before freezing.
            let mut probe = a.clone();
            probe.nu = a
                .nu
                .iter()
                .zip(g)
                .map(|(&nu, &gi)| 0.9 * nu + (1.0 - 0.9) * gi * gi)
                .collect();
            let frozen_p = match current_preconditioner(&adam, &probe).unwrap() {
                Precond::Diagonal(d) => d,
                _ => unreachable!(),
            };
            let frozen = OptimizerConfig::FrozenZoAdam {
                eta,
                beta1: b1,
                precond: Precond::Diagonal(frozen_p),
            };
            a = step(&adam, &a, g).unwrap();
            let mut fs = step(&frozen, &f, g).unwrap();
            fs.nu = a.nu.clone();
            assert!(a.x.iter().zip(&fs.x).all(|(p, q)| (p - q).abs() < 1e-14));
            f = fs;
        }
    }

    #[test]
    fn nonfinite_gradient_rejected() {
        let cfg = OptimizerConfig::ZoGd { eta: 0.1 };
        let state = OptimizerState::init(&cfg, vec![1.0]);
        assert!(matches!(step(&cfg, &state, &[f64::NAN]), Err(CoreError::NonFinite(_))));
    }

    #[test]
    fn fo_gd_loss_non_increasing_below_threshold() {
        let q = quad(&[1.0, 0.4]);
        let rec = run_trajectory(
            &OptimizerConfig::Gd { eta: 1.5 },
            &GradientSource::Exact,
            &q,
            vec![1.0, 1.0],
            &TrajectoryOptions::new(100),
            &RngStream::new(1, 0),
        )
        .unwrap();
        assert!(!rec.diverged);
        for w in rec.steps.windows(2) {
            assert!(w[1].loss <= w[0].loss + 1e-15);
        }
    }

    #[test]
    fn fo_gd_diverges_above_threshold() {
        // |1 - eta lambda| = 1.5 => geometric blowup past 1e12 well within 200 steps.
        let q = quad(&[1.0]);
        let rec = run_trajectory(
            &OptimizerConfig::Gd { eta: 2.5 },
            &GradientSource::Exact,
            &q,
            vec![1.0],
            &TrajectoryOptions::new(200),
            &RngStream::new(1, 0),
        )
        .unwrap();
        assert!(rec.diverged);
        assert!(rec.diverged_at.unwrap() <= 200);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let q = quad(&[1.0, 0.5]);
        let mut opts = TrajectoryOptions::new(25);
        opts.curvature_every = Some(10);
        opts.trace_probes = 16;
        opts.power_iters = 10;
        let run = || {
            run_trajectory(
                &OptimizerConfig::ZoGd { eta: 0.25 },
                &GradientSource::Estimated(EstimatorConfig::default()),
                &q,
                vec![1.0, -2.0],
                &opts,
                &RngStream::new(123, 9),
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.final_state.x, b.final_state.x);
        assert_eq!(a.estimator_evals, b.estimator_evals);
        assert_eq!(a.snapshots.len(), b.snapshots.len());
        for (s, t) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(s.lambda_max, t.lambda_max);
            assert_eq!(s.trace, t.trace);
        }
    }

    #[test]
    fn eta_schedule_switches_phases() {
        let q = quad(&[1.0]);
        let mut opts = TrajectoryOptions::new(10);
        opts.eta_schedule = vec![EtaPhase { start_step: 0, eta: 0.1 }, EtaPhase { start_step: 5, eta: 0.3 }];
        let rec = run_trajectory(
            &OptimizerConfig::Gd { eta: 0.1 },
            &GradientSource::Exact,
            &q,
            vec![1.0],
            &opts,
            &RngStream::new(5, 5),
        )
        .unwrap();
        assert_eq!(rec.steps[4].eta, 0.1);
        assert_eq!(rec.steps[5].eta, 0.3);
    }

    #[test]
    fn validation_rejects_bad_hyperparameters() {
        assert!(OptimizerConfig::ZoGd { eta: 0.0 }.validate().is_err());
        assert!(OptimizerConfig::ZoGdm { eta: 0.1, beta: 1.0 }.validate().is_err());
        assert!(OptimizerConfig::ZoAdam { eta: 0.1, beta1: 0.9, beta2: 0.999, eps: 0.0 }
            .validate()
            .is_err());
        assert!(OptimizerConfig::FrozenZoAdam {
            eta: 0.1,
            beta1: 0.9,
            precond: Precond::Diagonal(vec![1.0, -1.0])
        }
        .validate()
        .is_err());
    }
}
