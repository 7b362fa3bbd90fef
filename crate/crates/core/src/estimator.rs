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

//! Zeroth-order gradient estimators built on the two-point rule
//! `[(f(x + mu u) - f(x - mu u)) / (2 mu)] u`, plus the Gaussian
//! fourth-moment identities their second-moment analysis rests on.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::linalg::{self, Mat};
use crate::math;
use crate::objective::{Objective, QuadraticModel};
use crate::rng::{self, RngStream};

/// Default smoothing parameter.
pub const DEFAULT_MU: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Central two-point rule with a standard Gaussian direction.
    CentralGaussian,
    /// One-sided rule `[(f(x + mu u) - f(x)) / mu] u`.
    ForwardGaussian,
    /// Central rule with the direction uniform on the radius-sqrt(d) sphere.
    CentralSphere,
    /// Average of `n` independent central Gaussian estimates.
    MultiQueryGaussian(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub mu: f64,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(CoreError::InvalidParameter("smoothing mu must be > 0".into()));
        }
        if let EstimatorKind::MultiQueryGaussian(n) = kind {
            if n == 0 {
                return Err(CoreError::InvalidParameter("multi-query n must be >= 1".into()));
            }
        }
        Ok(Self { kind, mu })
    }

    pub fn central_gaussian(mu: f64) -> Result<Self> {
        Self::new(EstimatorKind::CentralGaussian, mu)
    }

    /// Function evaluations one estimate consumes.
    pub fn evals_per_estimate(&self) -> usize {
        match self.kind {
            EstimatorKind::CentralGaussian | EstimatorKind::CentralSphere | EstimatorKind::ForwardGaussian => 2,
            EstimatorKind::MultiQueryGaussian(n) => 2 * n,
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { kind: EstimatorKind::CentralGaussian, mu: DEFAULT_MU }
    }
}

/// One gradient estimate with the directions that produced it, so any
/// stochastic update can be replayed exactly.
#[derive(Debug, Clone)]
pub struct EstimateSample {
    pub directions: Vec<Vec<f64>>,
    pub estimate: Vec<f64>,
    pub evals: usize,
}

/// Central two-point estimate along a fixed direction.
pub fn central_along<O: Objective + ?Sized>(obj: &O, x: &[f64], u: &[f64], mu: f64) -> Result<Vec<f64>> {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    linalg::axpy(&mut xp, mu, u);
    linalg::axpy(&mut xm, -mu, u);
    let coeff = (obj.value(&xp)? - obj.value(&xm)?) / (2.0 * mu);
    Ok(u.iter().map(|ui| coeff * ui).collect())
}

/// Forward-difference estimate along a fixed direction.
pub fn forward_along<O: Objective + ?Sized>(obj: &O, x: &[f64], u: &[f64], mu: f64) -> Result<Vec<f64>> {
    let mut xp = x.to_vec();
    linalg::axpy(&mut xp, mu, u);
    let coeff = (obj.value(&xp)? - obj.value(x)?) / mu;
    Ok(u.iter().map(|ui| coeff * ui).collect())
}

/// Draws direction(s) from `stream` and forms the configured estimate.
pub fn estimate_gradient<O: Objective + ?Sized>(
    cfg: &EstimatorConfig,
    obj: &O,
    x: &[f64],
    stream: &RngStream,
) -> Result<EstimateSample> {
    let mut rng = stream.rng();
    estimate_gradient_with(cfg, obj, x, &mut rng)
}

/// Same as [`estimate_gradient`] but consumes an already-positioned generator,
/// for callers that draw several estimates in sequence.
pub fn estimate_gradient_with<O: Objective + ?Sized, R: Rng>(
    cfg: &EstimatorConfig,
    obj: &O,
    x: &[f64],
    rng: &mut R,
) -> Result<EstimateSample> {
    let d = obj.dim();
    match cfg.kind {
        EstimatorKind::CentralGaussian => {
            let u = rng::gaussian_fill(d, rng);
            let estimate = central_along(obj, x, &u, cfg.mu)?;
            Ok(EstimateSample { directions: alloc::vec![u], estimate, evals: 2 })
        }
        EstimatorKind::CentralSphere => {
            let u = rng::sphere_fill(d, rng);
            let estimate = central_along(obj, x, &u, cfg.mu)?;
            Ok(EstimateSample { directions: alloc::vec![u], estimate, evals: 2 })
        }
        EstimatorKind::ForwardGaussian => {
            let u = rng::gaussian_fill(d, rng);
            let estimate = forward_along(obj, x, &u, cfg.mu)?;
            Ok(EstimateSample { directions: alloc::vec![u], estimate, evals: 2 })
        }
        EstimatorKind::MultiQueryGaussian(n) => {
            let mut directions = Vec::with_capacity(n);
            let mut acc = alloc::vec![0.0f64; d];
            for _ in 0..n {
                let u = rng::gaussian_fill(d, rng);
                let e = central_along(obj, x, &u, cfg.mu)?;
                linalg::axpy(&mut acc, 1.0 / n as f64, &e);
                directions.push(u);
            }
            Ok(EstimateSample { directions, estimate: acc, evals: 2 * n })
        }
    }
}

// ---------------------------------------------------------------------------
// Gaussian fourth-moment identities
// ---------------------------------------------------------------------------

/// `E[u u^T A u u^T] = A + A^T + tr(A) I` for `u ~ N(0, I)`.
pub fn isserlis_fourth_moment(a: &Mat) -> Mat {
    let n = a.rows;
    assert_eq!(a.cols, n, "square matrix required");
    let tr: f64 = (0..n).map(|i| a.get(i, i)).sum();
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = a.get(i, j) + a.get(j, i);
            if i == j {
                v += tr;
            }
            out.set(i, j, v);
        }
    }
    out
}

/// Weighted variant for a positive diagonal `Sigma`:
/// `E[Sigma^{-1/2} u u^T Sigma^{1/2} A Sigma^{1/2} u u^T Sigma^{-1/2}]
///  = A + A^T + tr(Sigma A) Sigma^{-1}`.
pub fn isserlis_fourth_moment_weighted(a: &Mat, sigma: &[f64]) -> Result<Mat> {
    let n = a.rows;
    assert_eq!(a.cols, n, "square matrix required");
    if sigma.len() != n {
        return Err(CoreError::DimMismatch { expected: n, got: sigma.len(), what: "sigma weights" });
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(CoreError::InvalidParameter("sigma weights must be positive".into()));
    }
    let tr_sa: f64 = (0..n).map(|i| sigma[i] * a.get(i, i)).sum();
    let mut out = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = a.get(i, j) + a.get(j, i);
            if i == j {
                v += tr_sa / sigma[i];
            }
            out.set(i, j, v);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Monte-Carlo mean check
// ---------------------------------------------------------------------------

/// Per-coordinate Monte-Carlo mean with standard errors.
#[derive(Debug, Clone)]
pub struct MeanEstimate {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Monte-Carlo mean of the estimator on a quadratic; the contract is
/// agreement with the exact gradient `H (x - x*)` within sampling error.
pub fn estimator_mean_check(
    cfg: &EstimatorConfig,
    quad: &QuadraticModel,
    x: &[f64],
    replicates: usize,
    stream: &RngStream,
) -> Result<MeanEstimate> {
    let d = quad.dim();
    let mut rng = stream.rng();
    let mut sum = alloc::vec![0.0f64; d];
    let mut sum_sq = alloc::vec![0.0f64; d];
    for _ in 0..replicates {
        let s = estimate_gradient_with(cfg, quad, x, &mut rng)?;
        for i in 0..d {
            sum[i] += s.estimate[i];
            sum_sq[i] += s.estimate[i] * s.estimate[i];
        }
    }
    let n = replicates as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = (0..d)
        .map(|i| {
            if replicates > 1 {
                let var = (sum_sq[i] - n * mean[i] * mean[i]).max(0.0) / (n - 1.0);
                math::sqrt(var / n)
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(MeanEstimate { mean, std_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn quad_1d() -> QuadraticModel {
        QuadraticModel::from_diagonal(vec![2.0], vec![0.0], 0.0).unwrap()
    }

    #[test]
    fn central_is_exact_on_quadratics() {
        // u^T H x * u with u = 1.5: (1.5 * 2 * 1) * 1.5 = 4.5, any mu.
        let q = quad_1d();
        let got = central_along(&q, &[1.0], &[1.5], 0.1).unwrap();
        assert!((got[0] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn forward_adds_odd_curvature_term() {
        // u u^T H x + (mu/2)(u^T H u) u = 4.5 + 0.05 * (2.25 * 2) * 1.5 = 4.8375.
        let q = quad_1d();
        let got = forward_along(&q, &[1.0], &[1.5], 0.1).unwrap();
        assert!((got[0] - 4.8375).abs() < 1e-12, "got {}", got[0]);
    }

    #[test]
    fn central_is_mu_independent_on_quadratics() {
        let q = QuadraticModel::from_diagonal(vec![2.0, 0.7, 1.3], vec![0.0; 3], 0.0).unwrap();
        let x = [0.4, -1.0, 2.0];
        let u = RngStream::new(17, 0).gaussian_vector(3);
        let reference = central_along(&q, &x, &u, 1e-3).unwrap();
        for mu in [1e-6, 1.0] {
            let other = central_along(&q, &x, &u, mu).unwrap();
            for (a, b) in reference.iter().zip(&other) {
                let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
                assert!(rel <= 1e-9, "mu {mu}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn evaluation_counts_match_definitions() {
        let q = quad_1d();
        let stream = RngStream::new(2, 0);
        for (kind, expect) in [
            (EstimatorKind::CentralGaussian, 2usize),
            (EstimatorKind::ForwardGaussian, 2),
            (EstimatorKind::CentralSphere, 2),
            (EstimatorKind::MultiQueryGaussian(7), 14),
        ] {
            let cfg = EstimatorConfig::new(kind, 1e-3).unwrap();
            let s = estimate_gradient(&cfg, &q, &[1.0], &stream).unwrap();
            assert_eq!(s.evals, expect);
            assert_eq!(cfg.evals_per_estimate(), expect);
        }
    }

    #[test]
    fn multi_query_replays_from_logged_directions() {
        let q = QuadraticModel::from_diagonal(vec![1.0, 3.0], vec![0.0, 0.0], 0.0).unwrap();
        let cfg = EstimatorConfig::new(EstimatorKind::MultiQueryGaussian(5), 1e-3).unwrap();
        let x = [1.0, -0.5];
        let s = estimate_gradient(&cfg, &q, &x, &RngStream::new(4, 1)).unwrap();
        let mut mean = vec![0.0f64; 2];
        for u in &s.directions {
            let e = central_along(&q, &x, u, cfg.mu).unwrap();
            linalg::axpy(&mut mean, 0.2, &e);
        }
        for (a, b) in s.estimate.iter().zip(&mean) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn isserlis_identity_matrix() {
        let out = isserlis_fourth_moment(&Mat::identity(2));
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 4.0 } else { 0.0 };
                assert_eq!(out.get(i, j), expect);
            }
        }
        let zero = isserlis_fourth_moment(&Mat::zeros(3, 3));
        assert!(zero.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn isserlis_matches_monte_carlo() {
        let d = 3usize;
        let a_data = RngStream::new(33, 0).gaussian_vector(d * d);
        let a = Mat { rows: d, cols: d, data: a_data };
        let expect = isserlis_fourth_moment(&a);

        let n = 1_000_000usize;
        let mut rng = RngStream::new(33, 1).rng();
        let mut sum = vec![0.0f64; d * d];
        let mut sum_sq = vec![0.0f64; d * d];
        for _ in 0..n {
            let u = rng::gaussian_fill(d, &mut rng);
            let au = a.matvec(&u);
            let q = linalg::dot(&u, &au);
            for i in 0..d {
                for j in 0..d {
                    let v = q * u[i] * u[j];
                    sum[i * d + j] += v;
                    sum_sq[i * d + j] += v * v;
                }
            }
        }
        let nf = n as f64;
        for k in 0..d * d {
            let mean = sum[k] / nf;
            let var = (sum_sq[k] - nf * mean * mean).max(0.0) / (nf - 1.0);
            let se = (var / nf).sqrt();
            assert!(
                (mean - expect.data[k]).abs() <= 4.0 * se,
                "entry {k}: mc {mean} vs closed form {}",
                expect.data[k]
            );
        }
    }

    #[test]
    fn weighted_isserlis_matches_monte_carlo() {
        let d = 3usize;
        let sigma = [0.5f64, 1.0, 2.5];
        let a_data = RngStream::new(44, 0).gaussian_vector(d * d);
        let a = Mat { rows: d, cols: d, data: a_data };
        let expect = isserlis_fourth_moment_weighted(&a, &sigma).unwrap();

        let n = 1_000_000usize;
        let mut rng = RngStream::new(44, 1).rng();
        let sqrt_s: Vec<f64> = sigma.iter().map(|s| s.sqrt()).collect();
        let mut sum = vec![0.0f64; d * d];
        let mut sum_sq = vec![0.0f64; d * d];
        for _ in 0..n {
            let u = rng::gaussian_fill(d, &mut rng);
            // q = u^T (S^{1/2} A S^{1/2}) u
            let su: Vec<f64> = (0..d).map(|i| sqrt_s[i] * u[i]).collect();
            let asu = a.matvec(&su);
            let q: f64 = (0..d).map(|i| su[i] * asu[i]).sum();
            for i in 0..d {
                for j in 0..d {
                    let v = q * u[i] * u[j] / (sqrt_s[i] * sqrt_s[j]);
                    sum[i * d + j] += v;
                    sum_sq[i * d + j] += v * v;
                }
            }
        }
        let nf = n as f64;
        for k in 0..d * d {
            let mean = sum[k] / nf;
            let var = (sum_sq[k] - nf * mean * mean).max(0.0) / (nf - 1.0);
            let se = (var / nf).sqrt();
            assert!(
                (mean - expect.data[k]).abs() <= 4.0 * se,
                "entry {k}: mc {mean} vs closed form {}",
                expect.data[k]
            );
        }
    }

    #[test]
    fn mean_check_agrees_with_exact_gradient() {
        let quad = QuadraticModel::from_diagonal(vec![1.0, 2.0], vec![0.0, 0.0], 0.0).unwrap();
        let x = [1.0, 1.0];
        let cfg = EstimatorConfig::default();
        let est = estimator_mean_check(&cfg, &quad, &x, 100_000, &RngStream::new(8, 0)).unwrap();
        for (i, target) in [1.0, 2.0].iter().enumerate() {
            assert!(
                (est.mean[i] - target).abs() <= 4.0 * est.std_error[i],
                "coord {i}: {} vs {target} (se {})",
                est.mean[i],
                est.std_error[i]
            );
        }
    }

    #[test]
    fn mean_is_exactly_zero_at_minimizer() {
        let quad = QuadraticModel::from_diagonal(vec![1.0, 2.0], vec![0.3, -0.7], 0.0).unwrap();
        let cfg = EstimatorConfig::default();
        let est = estimator_mean_check(&cfg, &quad, &[0.3, -0.7], 100, &RngStream::new(9, 0)).unwrap();
        assert!(est.mean.iter().all(|&m| m.abs() < 1e-12));
    }

    #[test]
    fn sphere_and_forward_means_match_gaussian() {
        let quad = QuadraticModel::from_diagonal(vec![1.0, 2.0], vec![0.0, 0.0], 0.0).unwrap();
        let x = [1.0, 1.0];
        let exact = [1.0, 2.0];
        for kind in [EstimatorKind::CentralSphere, EstimatorKind::ForwardGaussian] {
            let cfg = EstimatorConfig::new(kind, 1e-3).unwrap();
            let est = estimator_mean_check(&cfg, &quad, &x, 100_000, &RngStream::new(10, 0)).unwrap();
            for i in 0..2 {
                assert!(
                    (est.mean[i] - exact[i]).abs() <= 4.0 * est.std_error[i],
                    "{kind:?} coord {i}: {} (se {})",
                    est.mean[i],
                    est.std_error[i]
                );
            }
        }
    }
}
