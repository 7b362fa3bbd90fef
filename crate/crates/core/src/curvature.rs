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

//! Training-time curvature statistics, all matrix-free: top Hessian
//! eigenvalue by power iteration, trace by Hutchinson probes, their
//! preconditioned variants, and the relative commutator diagnostic
//! `||P H - H P||_F / ||P H||_F`.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::linalg::{self, aitken_tail};
use crate::math;
use crate::objective::Objective;
use crate::rng::{self, RngStream};

/// Power-iteration count used when none is configured.
pub const DEFAULT_POWER_ITERS: usize = 50;
/// Hutchinson probe count used when none is configured.
pub const DEFAULT_TRACE_PROBES: usize = 500;
/// Probe count for the relative commutator.
pub const DEFAULT_RELCOMM_PROBES: usize = 50;

/// Curvature statistics at one training step.
#[derive(Debug, Clone)]
pub struct CurvatureSnapshot {
    pub step: usize,
    pub lambda_max: f64,
    /// Set when the converged Rayleigh quotient is negative, i.e. the
    /// largest-magnitude eigenvalue is negative.
    pub lambda_negative: bool,
    pub trace: f64,
    pub trace_se: f64,
    pub precond_lambda_max: Option<f64>,
    pub precond_trace: Option<f64>,
    pub precond_trace_se: Option<f64>,
    pub relcomm: Option<f64>,
    pub relcomm_se: Option<f64>,
}

/// Top eigenvalue (power iteration on HVPs) and trace (Hutchinson) of the
/// Hessian at `x`.
pub fn probe_curvature<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    probes: usize,
    iters: usize,
    stream: &RngStream,
) -> Result<CurvatureSnapshot> {
    let d = obj.dim();
    let top =
        linalg::power_iteration_top_eig(|v| obj.hvp(x, v), d, iters, &stream.substream(0))?;
    let tr = linalg::hutchinson_trace(|z| obj.hvp(x, z), d, probes, &stream.substream(1))?;
    Ok(CurvatureSnapshot {
        step: 0,
        lambda_max: top.value,
        lambda_negative: top.value < 0.0,
        trace: tr.mean,
        trace_se: tr.std_error,
        precond_lambda_max: None,
        precond_trace: None,
        precond_trace_se: None,
        relcomm: None,
        relcomm_se: None,
    })
}

/// Top eigenvalue and trace of `P^{-1} H` for a positive diagonal `P`.
///
/// The power iteration runs on the plain operator `v -> P^{-1} (H v)`; the
/// Rayleigh quotient is taken in the `P` inner product, where the operator
/// is self-adjoint, so the quotient is real and converges monotonically.
pub fn probe_preconditioned<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    p_diag: &[f64],
    probes: usize,
    iters: usize,
    stream: &RngStream,
) -> Result<(f64, f64, f64)> {
    let d = obj.dim();
    if p_diag.len() != d {
        return Err(CoreError::DimMismatch { expected: d, got: p_diag.len(), what: "preconditioner" });
    }
    if p_diag.iter().any(|&p| !(p > 0.0)) {
        return Err(CoreError::InvalidParameter("preconditioner entries must be positive".into()));
    }

    // lambda_max(P^{-1} H) by power iteration with the P-inner-product
    // Rayleigh quotient  v^T H v / v^T P v.
    let mut v = stream.substream(0).gaussian_vector(d);
    let nv = linalg::norm2(&v);
    if nv == 0.0 {
        return Err(CoreError::NonFinite("power iteration start vector".into()));
    }
    linalg::scale(&mut v, 1.0 / nv);
    let mut history = Vec::with_capacity(iters);
    let mut lam = 0.0f64;
    for _ in 0..iters {
        let hv = obj.hvp(x, &v)?;
        let vp: f64 = v.iter().zip(p_diag).map(|(a, p)| a * a * p).sum();
        let rq = linalg::dot(&v, &hv) / vp;
        history.push(rq);
        lam = rq;
        let mut w: Vec<f64> = hv.iter().zip(p_diag).map(|(h, p)| h / p).collect();
        let nw = linalg::norm2(&w);
        if nw == 0.0 {
            lam = 0.0;
            break;
        }
        linalg::scale(&mut w, 1.0 / nw);
        v = w;
    }
    let lambda_max = aitken_tail(&history).unwrap_or(lam);

    // Tr(P^{-1} H) = E[z^T P^{-1} H z] over Rademacher probes.
    let tr = linalg::hutchinson_trace(
        |z| {
            let hz = obj.hvp(x, z)?;
            Ok(hz.iter().zip(p_diag).map(|(h, p)| h / p).collect())
        },
        d,
        probes,
        &stream.substream(1),
    )?;
    Ok((lambda_max, tr.mean, tr.std_error))
}

/// Probe estimate of the relative commutator Frobenius ratio.
#[derive(Debug, Clone, Copy)]
pub struct RelCommEstimate {
    /// `None` when the denominator norm estimate vanished.
    pub ratio: Option<f64>,
    pub std_error: f64,
}

/// Estimates `||[P, H]||_F / ||P H||_F` via `||A||_F^2 = E ||A z||^2` with
/// Rademacher probes; each probe costs two HVPs.
pub fn relative_commutator<O: Objective + ?Sized>(
    obj: &O,
    x: &[f64],
    p_diag: &[f64],
    probes: usize,
    stream: &RngStream,
) -> Result<RelCommEstimate> {
    let d = obj.dim();
    if p_diag.len() != d {
        return Err(CoreError::DimMismatch { expected: d, got: p_diag.len(), what: "preconditioner" });
    }
    if p_diag.iter().any(|&p| !(p > 0.0)) {
        return Err(CoreError::InvalidParameter("preconditioner entries must be positive".into()));
    }
    if probes == 0 {
        return Err(CoreError::InvalidParameter("relcomm needs probes >= 1".into()));
    }
    let mut rng = stream.rng();
    let mut num = Vec::with_capacity(probes);
    let mut den = Vec::with_capacity(probes);
    for _ in 0..probes {
        let z = rng::rademacher_fill(d, &mut rng);
        let hz = obj.hvp(x, &z)?;
        let pz: Vec<f64> = z.iter().zip(p_diag).map(|(a, p)| a * p).collect();
        let hpz = obj.hvp(x, &pz)?;
        let mut num_sq = 0.0f64;
        let mut den_sq = 0.0f64;
        for i in 0..d {
            let phz = p_diag[i] * hz[i];
            let c = phz - hpz[i];
            num_sq += c * c;
            den_sq += phz * phz;
        }
        num.push(num_sq);
        den.push(den_sq);
    }
    let sum_num: f64 = num.iter().sum();
    let sum_den: f64 = den.iter().sum();
    if sum_den == 0.0 {
        return Ok(RelCommEstimate { ratio: None, std_error: 0.0 });
    }
    let ratio = math::sqrt(sum_num / sum_den);
    // Jackknife over probes.
    let std_error = if probes > 1 {
        let n = probes as f64;
        let mut mean_loo = 0.0f64;
        let mut loo = Vec::with_capacity(probes);
        for i in 0..probes {
            let dsum = sum_den - den[i];
            let r = if dsum > 0.0 { math::sqrt((sum_num - num[i]) / dsum) } else { ratio };
            loo.push(r);
            mean_loo += r;
        }
        mean_loo /= n;
        let ss: f64 = loo.iter().map(|r| (r - mean_loo) * (r - mean_loo)).sum();
        math::sqrt(ss * (n - 1.0) / n)
    } else {
        f64::INFINITY
    };
    Ok(RelCommEstimate { ratio: Some(ratio), std_error })
}
