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

//! Exact second-moment (covariance) operators of the zeroth-order updates
//! on quadratics, assembled as dense `3d x 3d` matrices over the stacked
//! per-coordinate blocks `(E[x_i^2], E[eta x_i m_i], E[eta^2 m_i^2])`.
//!
//! Each coordinate carries a local `3x3` block
//!
//! ```text
//! K_i = | 1 - 2x + a x^2   2b(x - 1)   b^2 |
//!       | x - a x^2        b(1 - 2x)  -b^2 |
//!       | a x^2            2b x        b^2 |
//! ```
//!
//! with `x = eta * lambda_i`, plus a global rank-one coupling that injects
//! `c * eta^2 * sum_j lambda_j^2 (W_j)_11` through the pattern `(1, -1, 1)`.
//! The fourth-moment coefficients `(a, c)` are `(2, 1)` for Gaussian
//! directions, scaled by `d/(d+2)` on the sphere, and `(1 + 1/n, 1/n)` for
//! `n`-query averaging. The frozen-Adam operator uses `eta~ = (1 - b1) eta`,
//! the preconditioned spectrum, and sigma-weighted coupling
//! `eta~^2 sigma_i^{-1} sigma_j lambda~_j^2`.
//!
//! Mean-square stability is exactly `rho < 1` for these operators; the
//! spectral radius is attained in the cone of PSD block tuples, which is
//! what makes plain power iteration from a positive start reliable here.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::estimator::{estimate_gradient_with, EstimatorConfig};
use crate::linalg::{self, aitken_tail, Mat, Spectrum};
use crate::math;
use crate::objective::{Objective, QuadraticModel};
use crate::optimizer::{step, OptimizerConfig, OptimizerState};
use crate::rng::RngStream;
use crate::stability::{ms_condition_value, StabilityFamily};

/// Per-coordinate second-moment block
/// `[[E x^2, E eta x m], [E eta x m, E eta^2 m^2]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovBlock {
    pub w11: f64,
    pub w12: f64,
    pub w22: f64,
}

impl CovBlock {
    pub fn zero() -> Self {
        Self { w11: 0.0, w12: 0.0, w22: 0.0 }
    }

    /// Smallest eigenvalue of the symmetric 2x2 block.
    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.w11 + self.w22);
        let rad = math::sqrt(0.25 * (self.w11 - self.w22) * (self.w11 - self.w22) + self.w12 * self.w12);
        mean - rad
    }
}

/// Tuple of covariance blocks, one per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CovState {
    pub blocks: Vec<CovBlock>,
}

impl CovState {
    pub fn zeros(d: usize) -> Self {
        Self { blocks: vec![CovBlock::zero(); d] }
    }

    /// State of a deterministic start `x0` with zero momentum:
    /// `w11 = x0_i^2`, other entries zero.
    pub fn from_deterministic_x0(x0: &[f64]) -> Self {
        Self { blocks: x0.iter().map(|&x| CovBlock { w11: x * x, w12: 0.0, w22: 0.0 }).collect() }
    }

    /// `E ||x||^2 = sum_i w11_i`.
    pub fn total_w11(&self) -> f64 {
        self.blocks.iter().map(|b| b.w11).sum()
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.blocks.len());
        for b in &self.blocks {
            v.push(b.w11);
            v.push(b.w12);
            v.push(b.w22);
        }
        v
    }

    fn from_slice(v: &[f64]) -> Self {
        let blocks = v
            .chunks_exact(3)
            .map(|c| CovBlock { w11: c[0], w12: c[1], w22: c[2] })
            .collect();
        Self { blocks }
    }
}

/// Optimizer family of a covariance operator. The Adam variant carries the
/// positive `sigma` weights of the simultaneously diagonalized
/// preconditioner; its spectrum argument is that of `P^{-1} H`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovFamily {
    ZoGd,
    ZoGdm { beta: f64 },
    FrozenZoAdam { beta1: f64, sigma: Vec<f64> },
}

/// Direction distribution behind the two-point estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorVariant {
    Gaussian,
    Sphere,
    MultiQuery(usize),
}

impl EstimatorVariant {
    /// `(a, c)` in `E[G A G] = a A + c tr(A) I` for symmetric `A`, where `G`
    /// is the (averaged) outer product of directions.
    pub fn fourth_moment_coeffs(&self, d: usize) -> (f64, f64) {
        match self {
            EstimatorVariant::Gaussian => (2.0, 1.0),
            EstimatorVariant::Sphere => {
                let f = d as f64 / (d as f64 + 2.0);
                (2.0 * f, f)
            }
            EstimatorVariant::MultiQuery(n) => {
                let inv = 1.0 / (*n as f64);
                (1.0 + inv, inv)
            }
        }
    }

    /// Largest `eta * lambda` below which the local `(1,1)` entry stays
    /// contracting; the scalar condition diverges there.
    pub fn pole(&self, d: usize) -> f64 {
        2.0 / self.fourth_moment_coeffs(d).0
    }
}

/// Dense covariance operator with its assembly metadata.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub mat: Mat,
    pub family: CovFamily,
    pub eta: f64,
    pub spectrum: Spectrum,
    pub variant: EstimatorVariant,
    /// Coupling-strength coefficient `c_eff * sum lambda^2` that lower
    /// bounds the spectral radius.
    rho_lower_bound: f64,
}

impl OperatorMatrix {
    pub fn n_blocks(&self) -> usize {
        self.mat.rows / 3
    }

    /// One application of the recursion to a block state.
    pub fn apply(&self, state: &CovState) -> CovState {
        assert_eq!(state.blocks.len(), self.n_blocks(), "state dimension mismatch");
        CovState::from_slice(&self.mat.matvec(&state.to_vec()))
    }
}

/// Local `3x3` block at `x = eta * lambda` with momentum `b` and
/// fourth-moment coefficient `a` (local coupling included).
pub fn local_block(x: f64, b: f64, a: f64) -> Mat {
    Mat::from_rows(&[
        &[1.0 - 2.0 * x + a * x * x, 2.0 * b * (x - 1.0), b * b],
        &[x - a * x * x, b * (1.0 - 2.0 * x), -b * b],
        &[a * x * x, 2.0 * b * x, b * b],
    ])
}

fn assemble_with_coeffs(
    spectrum: &Spectrum,
    eta: f64,
    b: f64,
    a: f64,
    c: f64,
    sigma: Option<&[f64]>,
) -> Mat {
    let lambdas = spectrum.values();
    let d = lambdas.len();
    let mut m = Mat::zeros(3 * d, 3 * d);
    for i in 0..d {
        let k = local_block(eta * lambdas[i], b, a);
        for r in 0..3 {
            for s in 0..3 {
                m.set(3 * i + r, 3 * i + s, k.get(r, s));
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            let weight = match sigma {
                None => c * eta * eta * lambdas[j] * lambdas[j],
                Some(sig) => c * eta * eta * lambdas[j] * lambdas[j] * sig[j] / sig[i],
            };
            m.add_to(3 * i, 3 * j, weight);
            m.add_to(3 * i + 1, 3 * j, -weight);
            m.add_to(3 * i + 2, 3 * j, weight);
        }
    }
    m
}

/// Builds the covariance operator for the given family, spectrum, and
/// estimator variant. Zero eigenvalues are dropped: their coordinates stay
/// bounded and do not participate in the spectral dichotomy.
///
/// Non-Gaussian variants are only derived for ZO-GD. The frozen-Adam
/// `sigma` weights must be aligned with the spectrum's descending order;
/// block `i` of the operator (and of any [`CovState`] it acts on) refers to
/// the `i`-th largest eigenvalue.
pub fn assemble_operator(
    family: &CovFamily,
    spectrum: &Spectrum,
    eta: f64,
    variant: EstimatorVariant,
) -> Result<OperatorMatrix> {
    if !(eta > 0.0) {
        return Err(CoreError::InvalidParameter(format!("eta must be > 0, got {eta}")));
    }
    if let EstimatorVariant::MultiQuery(0) = variant {
        return Err(CoreError::InvalidParameter("multi-query n must be >= 1".into()));
    }
    if variant != EstimatorVariant::Gaussian && !matches!(family, CovFamily::ZoGd) {
        return Err(CoreError::InvalidParameter(
            "non-Gaussian estimator variants are only derived for ZO-GD".into(),
        ));
    }

    // Drop zero eigenvalues (and the matching sigma weights).
    let keep: Vec<usize> =
        (0..spectrum.len()).filter(|&i| spectrum.values()[i] > 0.0).collect();
    let positive = Spectrum::new(keep.iter().map(|&i| spectrum.values()[i]).collect())?;
    let d = positive.len();

    let (mat, rho_lb) = match family {
        CovFamily::ZoGd | CovFamily::ZoGdm { .. } => {
            let b = match family {
                CovFamily::ZoGdm { beta } => {
                    if !(0.0..1.0).contains(beta) {
                        return Err(CoreError::InvalidParameter(format!(
                            "beta must be in [0, 1), got {beta}"
                        )));
                    }
                    *beta
                }
                _ => 0.0,
            };
            let (a, c) = variant.fourth_moment_coeffs(d);
            let mat = assemble_with_coeffs(&positive, eta, b, a, c, None);
            (mat, c * eta * eta * positive.sum_sq())
        }
        CovFamily::FrozenZoAdam { beta1, sigma } => {
            if !(0.0..1.0).contains(beta1) {
                return Err(CoreError::InvalidParameter(format!(
                    "beta1 must be in [0, 1), got {beta1}"
                )));
            }
            if sigma.len() != spectrum.len() {
                return Err(CoreError::DimMismatch {
                    expected: spectrum.len(),
                    got: sigma.len(),
                    what: "sigma weights",
                });
            }
            if sigma.iter().any(|&s| !(s > 0.0)) {
                return Err(CoreError::InvalidParameter("sigma weights must be positive".into()));
            }
            let sigma_kept: Vec<f64> = keep.iter().map(|&i| sigma[i]).collect();
            let eta_tilde = (1.0 - beta1) * eta;
            let mat = assemble_with_coeffs(&positive, eta_tilde, *beta1, 2.0, 1.0, Some(&sigma_kept));
            (mat, eta_tilde * eta_tilde * positive.sum_sq())
        }
    };
    Ok(OperatorMatrix {
        mat,
        family: family.clone(),
        eta,
        spectrum: positive,
        variant,
        rho_lower_bound: rho_lb,
    })
}

/// Spectral radius by power iteration from a strictly positive cone element
/// (every block `Q + delta I`). Stops when the Rayleigh quotient settles to
/// `1e-13` or after `1e4` iterations; the tail is delta-squared accelerated,
/// falling back to the average of the last two quotients.
pub fn spectral_radius(op: &OperatorMatrix) -> f64 {
    let n = op.mat.rows;
    let delta = 1e-3;
    let mut v: Vec<f64> = (0..n)
        .map(|k| match k % 3 {
            0 => 1.0 + delta,
            1 => -1.0,
            _ => 1.0 + delta,
        })
        .collect();
    let nv = linalg::norm2(&v);
    linalg::scale(&mut v, 1.0 / nv);

    let mut history: Vec<f64> = Vec::with_capacity(128);
    let mut prev_rq = f64::NAN;
    for _ in 0..10_000 {
        let w = op.mat.matvec(&v);
        let rq = linalg::dot(&v, &w);
        history.push(rq);
        let nw = linalg::norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w;
        linalg::scale(&mut v, 1.0 / nw);
        if prev_rq.is_finite() && math::abs(rq - prev_rq) < 1e-13 * rq.abs().max(1.0) {
            break;
        }
        prev_rq = rq;
    }
    let m = history.len();
    let rho = aitken_tail(&history).unwrap_or_else(|| {
        if m >= 2 {
            0.5 * (history[m - 1] + history[m - 2])
        } else {
            history[m - 1]
        }
    });
    assert!(
        rho >= op.rho_lower_bound * (1.0 - 1e-9) - 1e-12,
        "spectral radius {rho} below its coupling lower bound {}",
        op.rho_lower_bound
    );
    rho
}

/// Result of iterating the covariance recursion.
#[derive(Debug, Clone)]
pub struct CovIteration {
    /// `E ||x_t||^2` for `t = 0..=steps` (truncated on overflow).
    pub totals: Vec<f64>,
    /// Geometric growth rate estimated from the last finite ratio, set when
    /// the iteration overflowed.
    pub overflow_rate: Option<f64>,
}

/// Exact linear iteration of the operator, reporting the second-moment
/// total per step.
pub fn iterate_covariance(op: &OperatorMatrix, state0: &CovState, steps: usize) -> CovIteration {
    let mut state = state0.clone();
    let mut totals = Vec::with_capacity(steps + 1);
    totals.push(state.total_w11());
    let mut last_ratio = None;
    for _ in 0..steps {
        let next = op.apply(&state);
        let total = next.total_w11();
        if !total.is_finite() || total > 1e300 {
            return CovIteration { totals, overflow_rate: last_ratio };
        }
        let prev = *totals.last().unwrap();
        if prev > 0.0 && total > 0.0 {
            last_ratio = Some(total / prev);
        }
        totals.push(total);
        state = next;
    }
    CovIteration { totals, overflow_rate: None }
}

// ---------------------------------------------------------------------------
// Monte-Carlo second moments
// ---------------------------------------------------------------------------

/// Kahan-compensated accumulator; replicate reduction is order-independent
/// to within the compensation.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Per-step Monte-Carlo moments of a zeroth-order run on a quadratic.
#[derive(Debug, Clone)]
pub struct McMoments {
    /// `E ||x_t||^2` with jackknife standard errors, `t = 0..=steps`.
    pub mean_sq: Vec<f64>,
    pub se_sq: Vec<f64>,
    /// Mean trajectory `E[x_t]` per coordinate, with standard errors.
    pub mean_x: Vec<Vec<f64>>,
    pub se_x: Vec<Vec<f64>>,
    pub replicates: usize,
}

/// Runs `replicates` independent trajectories and reports per-step moments.
/// Divergent replicates are retained; unbounded growth is the signal the
/// theory predicts.
pub fn mc_second_moment(
    cfg: &OptimizerConfig,
    est: &EstimatorConfig,
    quad: &QuadraticModel,
    x0: &[f64],
    steps: usize,
    replicates: usize,
    stream: &RngStream,
) -> Result<McMoments> {
    if replicates < 2 {
        return Err(CoreError::InvalidParameter("need at least 2 replicates".into()));
    }
    let d = quad.dim();
    let t_len = steps + 1;
    let mut sq_sum = vec![Kahan::default(); t_len];
    let mut sq_sumsq = vec![0.0f64; t_len];
    let mut x_sum = vec![Kahan::default(); t_len * d];
    let mut x_sumsq = vec![0.0f64; t_len * d];

    for r in 0..replicates {
        let mut rng = stream.substream(r as u64).rng();
        let mut state = OptimizerState::init(cfg, x0.to_vec());
        for t in 0..t_len {
            let sq: f64 = state.x.iter().map(|v| v * v).sum();
            sq_sum[t].add(sq);
            sq_sumsq[t] += sq * sq;
            for i in 0..d {
                x_sum[t * d + i].add(state.x[i]);
                x_sumsq[t * d + i] += state.x[i] * state.x[i];
            }
            if t == steps {
                break;
            }
            let sample = estimate_gradient_with(est, quad, &state.x, &mut rng)?;
            state = step(cfg, &state, &sample.estimate)?;
        }
    }

    let n = replicates as f64;
    let se_of = |sum: f64, sumsq: f64| {
        let mean = sum / n;
        let var = (sumsq - n * mean * mean).max(0.0) / (n - 1.0);
        math::sqrt(var / n)
    };
    let mean_sq: Vec<f64> = sq_sum.iter().map(|k| k.sum / n).collect();
    let se_sq: Vec<f64> = (0..t_len).map(|t| se_of(sq_sum[t].sum, sq_sumsq[t])).collect();
    let mean_x: Vec<Vec<f64>> =
        (0..t_len).map(|t| (0..d).map(|i| x_sum[t * d + i].sum / n).collect()).collect();
    let se_x: Vec<Vec<f64>> = (0..t_len)
        .map(|t| (0..d).map(|i| se_of(x_sum[t * d + i].sum, x_sumsq[t * d + i])).collect())
        .collect();
    Ok(McMoments { mean_sq, se_sq, mean_x, se_x, replicates })
}

// ---------------------------------------------------------------------------
// Forward-difference stationary covariance
// ---------------------------------------------------------------------------

/// Diagonal of the stationary covariance of forward-difference ZO-GD,
/// `Sigma_inf = (Id - T)^{-1} (eta^2 mu^2 Q_H)`, where `Q_H` is the
/// sixth-moment source `E[(u^T H u)^2 u u^T] / 4`. For diagonal `H` the
/// source is diagonal with entries
/// `[8 l_i^2 + 4 l_i tr(H) + tr(H)^2 + 2 sum_j l_j^2] / 4`.
/// Requires the homogeneous dynamics to be stable (`S(eta) < 1`).
pub fn forward_fd_stationary_covariance(spectrum: &Spectrum, eta: f64, mu: f64) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(CoreError::InvalidParameter(format!("mu must be > 0, got {mu}")));
    }
    let s = ms_condition_value(spectrum, eta, &StabilityFamily::ZoGd)?;
    if s >= 1.0 {
        return Err(CoreError::OutOfDomain(format!(
            "no stationary covariance: mean-square condition S = {s} >= 1"
        )));
    }
    let lambdas = spectrum.values();
    let d = lambdas.len();
    let tr: f64 = spectrum.trace();
    let sumsq: f64 = spectrum.sum_sq();

    let mut system = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let t_ij = if i == j { 1.0 - 2.0 * eta * lambdas[i] + 2.0 * eta * eta * lambdas[i] * lambdas[i] } else { 0.0 }
                + eta * eta * lambdas[j] * lambdas[j];
            system.set(i, j, if i == j { 1.0 - t_ij } else { -t_ij });
        }
    }
    let rhs: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let q = 0.25 * (8.0 * l * l + 4.0 * l * tr + tr * tr + 2.0 * sumsq);
            eta * eta * mu * mu * q
        })
        .collect();
    linalg::solve_linear_small(&system, &rhs)
}

/// Closed-form diagonal of `Q_H = E[(u^T H u)^2 u u^T] / 4` for diagonal `H`.
pub fn forward_fd_source_diagonal(spectrum: &Spectrum) -> Vec<f64> {
    let tr = spectrum.trace();
    let sumsq = spectrum.sum_sq();
    spectrum
        .values()
        .iter()
        .map(|&l| 0.25 * (8.0 * l * l + 4.0 * l * tr + tr * tr + 2.0 * sumsq))
        .collect()
}

// ---------------------------------------------------------------------------
// Estimator-variant checks
// ---------------------------------------------------------------------------

/// Entrywise and spectral comparison of the sphere operator against the
/// Gaussian one.
#[derive(Debug, Clone)]
pub struct SphereCheck {
    /// Max absolute entry deviation of `T_sphere` from
    /// `T_linear + d/(d+2) (T_gauss - T_linear)`.
    pub max_entry_diff: f64,
    pub rho_sphere: f64,
    pub rho_gauss: f64,
}

/// Verifies that the sphere operator equals the Gaussian operator with all
/// stochastic quadratic terms scaled by `d/(d+2)`, and compares radii.
pub fn sphere_operator_check(spectrum: &Spectrum, eta: f64) -> Result<SphereCheck> {
    let gauss = assemble_operator(&CovFamily::ZoGd, spectrum, eta, EstimatorVariant::Gaussian)?;
    let sphere = assemble_operator(&CovFamily::ZoGd, spectrum, eta, EstimatorVariant::Sphere)?;
    let d = gauss.n_blocks();
    let factor = d as f64 / (d as f64 + 2.0);
    // Linear-in-eta part: fourth-moment coefficients set to zero.
    let linear = assemble_with_coeffs(&gauss.spectrum, eta, 0.0, 0.0, 0.0, None);
    let mut max_entry_diff = 0.0f64;
    for k in 0..gauss.mat.data.len() {
        let expect = linear.data[k] + factor * (gauss.mat.data[k] - linear.data[k]);
        max_entry_diff = max_entry_diff.max(math::abs(sphere.mat.data[k] - expect));
    }
    Ok(SphereCheck {
        max_entry_diff,
        rho_sphere: spectral_radius(&sphere),
        rho_gauss: spectral_radius(&gauss),
    })
}

/// Mean-square critical step size implied by `rho(T) = 1` for a ZO-GD
/// estimator variant, found by bisection over the step size.
pub fn implied_ms_threshold(variant: EstimatorVariant, spectrum: &Spectrum) -> Result<f64> {
    let positive = Spectrum::new(
        spectrum.values().iter().copied().filter(|&l| l > 0.0).collect(),
    )?;
    let d = positive.len();
    let pole_eta = variant.pole(d) / positive.lambda_max();
    let rho_at = |eta: f64| -> Result<f64> {
        let op = assemble_operator(&CovFamily::ZoGd, &positive, eta, variant)?;
        Ok(spectral_radius(&op))
    };
    let mut lo = 1e-9 * pole_eta;
    if rho_at(lo)? >= 1.0 {
        return Err(CoreError::OutOfDomain("operator unstable at the bracket base".into()));
    }
    // The critical step size approaches the pole as the stochastic coupling
    // weakens (large n), so walk the upper bracket toward it.
    let mut hi = f64::NAN;
    let mut margin = 1e-4;
    while margin >= 1e-14 {
        let candidate = pole_eta * (1.0 - margin);
        if rho_at(candidate)? > 1.0 {
            hi = candidate;
            break;
        }
        lo = candidate;
        margin *= 1e-2;
    }
    if !hi.is_finite() {
        return Err(CoreError::OutOfDomain("operator stable up to the pole bracket".into()));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if rho_at(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
