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

//! Differentiable objectives: the exact quadratic model used by the
//! stability theory, and synthetic datasets for the tiny-MLP experiments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::linalg::{self, SymMatrix};
use crate::math;
use crate::rng::RngStream;

/// Value, gradient, and Hessian-vector products of a twice-differentiable
/// function of a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>>;
}

/// Central finite difference of gradients,
/// `(grad(x + eps v) - grad(x - eps v)) / (2 eps)` with
/// `eps = 1e-4 (1 + ||x||) / ||v||`.
pub fn fd_hvp<O: Objective + ?Sized>(obj: &O, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let vnorm = linalg::norm2(v);
    if vnorm == 0.0 {
        return Err(CoreError::InvalidParameter("hvp direction must be nonzero".into()));
    }
    let eps = 1e-4 * (1.0 + linalg::norm2(x)) / vnorm;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    linalg::axpy(&mut xp, eps, v);
    linalg::axpy(&mut xm, -eps, v);
    let gp = obj.gradient(&xp)?;
    let gm = obj.gradient(&xm)?;
    Ok(gp.iter().zip(&gm).map(|(p, m)| (p - m) / (2.0 * eps)).collect())
}

// ---------------------------------------------------------------------------
// Quadratic model
// ---------------------------------------------------------------------------

/// Hessian of a quadratic model: diagonal canonical form or a dense matrix.
#[derive(Debug, Clone)]
pub enum QuadHessian {
    Diagonal(Vec<f64>),
    Dense(SymMatrix),
}

/// `f(x) = offset + (x - x*)^T H (x - x*) / 2` with `H` PSD and nonzero.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    minimizer: Vec<f64>,
    hessian: QuadHessian,
    offset: f64,
}

impl QuadraticModel {
    /// Diagonal Hessian; entries below `-1e-12` are rejected, tiny negatives
    /// clamped to zero.
    pub fn from_diagonal(diag: Vec<f64>, minimizer: Vec<f64>, offset: f64) -> Result<Self> {
        if diag.len() != minimizer.len() {
            return Err(CoreError::DimMismatch {
                expected: diag.len(),
                got: minimizer.len(),
                what: "quadratic minimizer",
            });
        }
        let mut clamped = diag;
        let mut all_zero = true;
        for v in clamped.iter_mut() {
            if *v < -1e-12 {
                return Err(CoreError::InvalidParameter(format!(
                    "hessian eigenvalue {v} is negative"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
            if *v != 0.0 {
                all_zero = false;
            }
        }
        if all_zero {
            return Err(CoreError::ZeroSpectrum);
        }
        Ok(Self { minimizer, hessian: QuadHessian::Diagonal(clamped), offset })
    }

    /// Dense Hessian; PSD is verified by eigendecomposition.
    pub fn from_dense(hessian: SymMatrix, minimizer: Vec<f64>, offset: f64) -> Result<Self> {
        if hessian.dim() != minimizer.len() {
            return Err(CoreError::DimMismatch {
                expected: hessian.dim(),
                got: minimizer.len(),
                what: "quadratic minimizer",
            });
        }
        let eig = linalg::sym_eigendecompose(&hessian)?;
        if eig.values.iter().any(|&v| v < -1e-12) {
            return Err(CoreError::InvalidParameter("hessian is not PSD".into()));
        }
        if eig.values.iter().all(|&v| v <= 0.0) {
            return Err(CoreError::ZeroSpectrum);
        }
        Ok(Self { minimizer, hessian: QuadHessian::Dense(hessian), offset })
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.minimizer
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn hessian(&self) -> &QuadHessian {
        &self.hessian
    }

    fn h_times(&self, v: &[f64]) -> Vec<f64> {
        match &self.hessian {
            QuadHessian::Diagonal(d) => d.iter().zip(v).map(|(a, b)| a * b).collect(),
            QuadHessian::Dense(m) => m.matvec(v),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.minimizer.len() {
            return Err(CoreError::DimMismatch {
                expected: self.minimizer.len(),
                got: x.len(),
                what: "quadratic argument",
            });
        }
        Ok(())
    }
}

impl Objective for QuadraticModel {
    fn dim(&self) -> usize {
        self.minimizer.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let dx = linalg::sub(x, &self.minimizer);
        Ok(self.offset + 0.5 * linalg::dot(&dx, &self.h_times(&dx)))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let dx = linalg::sub(x, &self.minimizer);
        Ok(self.h_times(&dx))
    }

    fn hvp(&self, _x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        Ok(self.h_times(v))
    }
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    OneHot,
    Regression,
}

/// `n x p` inputs with `n x c` targets, stored row-major.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub c: usize,
    pub kind: TargetKind,
    pub batch: BatchSize,
}

impl Dataset {
    pub fn new(
        inputs: Vec<f64>,
        targets: Vec<f64>,
        n: usize,
        p: usize,
        c: usize,
        kind: TargetKind,
    ) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::InvalidParameter("dataset needs n >= 1".into()));
        }
        if inputs.len() != n * p {
            return Err(CoreError::DimMismatch { expected: n * p, got: inputs.len(), what: "dataset inputs" });
        }
        if targets.len() != n * c {
            return Err(CoreError::DimMismatch { expected: n * c, got: targets.len(), what: "dataset targets" });
        }
        if kind == TargetKind::OneHot {
            for row in 0..n {
                let s: f64 = targets[row * c..(row + 1) * c].iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(CoreError::InvalidParameter(format!(
                        "one-hot target row {row} sums to {s}"
                    )));
                }
            }
        }
        Ok(Self { inputs, targets, n, p, c, kind, batch: BatchSize::Full })
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.p..(i + 1) * self.p]
    }

    pub fn target_row(&self, i: usize) -> &[f64] {
        &self.targets[i * self.c..(i + 1) * self.c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// `c` Gaussian clusters with one-hot class targets.
    GaussianClusters,
    /// Regression targets produced by a randomly initialized teacher network.
    TeacherMlp,
}

/// Synthetic dataset with standardized features (zero mean, unit variance
/// per column).
pub fn make_synthetic_dataset(
    n: usize,
    p: usize,
    c: usize,
    kind: DatasetKind,
    stream: &RngStream,
) -> Result<Dataset> {
    if n == 0 || p == 0 || c == 0 {
        return Err(CoreError::InvalidParameter("dataset sizes must be >= 1".into()));
    }
    let mut rng = stream.rng();
    let mut inputs = vec![0.0f64; n * p];
    match kind {
        DatasetKind::GaussianClusters => {
            // Clusters sit along one random direction with overlapping
            // unit-variance noise, so class boundaries are parallel slices:
            // the task is hard enough to drive curvature growth and the
            // signal is concentrated rather than isotropic.
            let mut dir = crate::rng::gaussian_fill(p, &mut rng);
            let norm = math::sqrt(dir.iter().map(|v| v * v).sum::<f64>()).max(1e-12);
            for v in dir.iter_mut() {
                *v /= norm;
            }
            let spacing = 1.6;
            for i in 0..n {
                let k = i % c;
                let offset = spacing * (k as f64 - 0.5 * (c as f64 - 1.0));
                let noise = crate::rng::gaussian_fill(p, &mut rng);
                for j in 0..p {
                    inputs[i * p + j] = offset * dir[j] + noise[j];
                }
            }
        }
        DatasetKind::TeacherMlp => {
            inputs = crate::rng::gaussian_fill(n * p, &mut rng);
        }
    }
    standardize_columns(&mut inputs, n, p);

    let targets = match kind {
        DatasetKind::GaussianClusters => {
            let mut t = vec![0.0f64; n * c];
            for i in 0..n {
                t[i * c + (i % c)] = 1.0;
            }
            t
        }
        DatasetKind::TeacherMlp => {
            // Fixed teacher [p, 8, c] with tanh hidden layer.
            let hidden = 8usize;
            let scale_in = 1.0 / math::sqrt(p as f64);
            let w1: Vec<f64> =
                crate::rng::gaussian_fill(hidden * p, &mut rng).iter().map(|v| v * scale_in).collect();
            let b1 = crate::rng::gaussian_fill(hidden, &mut rng);
            let scale_h = 1.0 / math::sqrt(hidden as f64);
            let w2: Vec<f64> =
                crate::rng::gaussian_fill(c * hidden, &mut rng).iter().map(|v| v * scale_h).collect();
            let b2 = crate::rng::gaussian_fill(c, &mut rng);
            let mut t = vec![0.0f64; n * c];
            for i in 0..n {
                let x = &inputs[i * p..(i + 1) * p];
                let mut h = vec![0.0f64; hidden];
                for a in 0..hidden {
                    h[a] = math::tanh(linalg::dot(&w1[a * p..(a + 1) * p], x) + b1[a]);
                }
                for b in 0..c {
                    t[i * c + b] = linalg::dot(&w2[b * hidden..(b + 1) * hidden], &h) + b2[b];
                }
            }
            t
        }
    };
    let kind_tag = match kind {
        DatasetKind::GaussianClusters => TargetKind::OneHot,
        DatasetKind::TeacherMlp => TargetKind::Regression,
    };
    Dataset::new(inputs, targets, n, p, c, kind_tag)
}

fn standardize_columns(data: &mut [f64], n: usize, p: usize) {
    for j in 0..p {
        let mut mean = 0.0;
        for i in 0..n {
            mean += data[i * p + j];
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let d = data[i * p + j] - mean;
            var += d * d;
        }
        var /= n as f64;
        let sd = if var > 0.0 { math::sqrt(var) } else { 1.0 };
        for i in 0..n {
            data[i * p + j] = (data[i * p + j] - mean) / sd;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_one_dimensional() {
        let q = QuadraticModel::from_diagonal(vec![2.0], vec![0.0], 0.0).unwrap();
        assert_eq!(q.value(&[1.0]).unwrap(), 1.0);
        assert_eq!(q.gradient(&[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn quad_at_minimizer() {
        let q = QuadraticModel::from_diagonal(vec![3.0, 1.0], vec![0.5, -0.5], 7.0).unwrap();
        assert_eq!(q.value(&[0.5, -0.5]).unwrap(), 7.0);
        assert_eq!(q.gradient(&[0.5, -0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn quad_hvp_matches_explicit_multiply() {
        let stream = RngStream::new(21, 0);
        let g = stream.gaussian_vector(16 + 4);
        let mut h = SymMatrix::diagonal(&[0.0; 4]);
        for i in 0..4 {
            for j in i..4 {
                h.set_sym(i, j, 0.5 * (g[i * 4 + j] + g[j * 4 + i]) + if i == j { 5.0 } else { 0.0 });
            }
        }
        let q = QuadraticModel::from_dense(h.clone(), vec![0.0; 4], 0.0).unwrap();
        let v = &g[16..20];
        let got = q.hvp(&[0.0; 4], v).unwrap();
        for i in 0..4 {
            let mut s = 0.0;
            for j in 0..4 {
                s += h.get(i, j) * v[j];
            }
            assert!((got[i] - s).abs() < 1e-14);
        }
    }

    #[test]
    fn quad_fd_hvp_matches_exact() {
        let q = QuadraticModel::from_diagonal(vec![4.0, 1.0, 0.5], vec![0.1, 0.2, 0.3], 1.0).unwrap();
        let x = [1.0, -2.0, 0.5];
        let v = [0.3, 0.7, -1.1];
        let exact = q.hvp(&x, &v).unwrap();
        let fd = fd_hvp(&q, &x, &v).unwrap();
        for (a, b) in exact.iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn quad_rejects_indefinite() {
        assert!(QuadraticModel::from_diagonal(vec![1.0, -0.5], vec![0.0, 0.0], 0.0).is_err());
        assert!(QuadraticModel::from_diagonal(vec![0.0, 0.0], vec![0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn clusters_dataset_is_one_hot_and_standardized() {
        let ds = make_synthetic_dataset(64, 8, 4, DatasetKind::GaussianClusters, &RngStream::new(1, 0)).unwrap();
        for i in 0..ds.n {
            let s: f64 = ds.target_row(i).iter().sum();
            assert_eq!(s, 1.0);
        }
        for j in 0..ds.p {
            let mean: f64 = (0..ds.n).map(|i| ds.inputs[i * ds.p + j]).sum::<f64>() / ds.n as f64;
            assert!(mean.abs() <= 1e-10, "column {j} mean {mean}");
            let var: f64 =
                (0..ds.n).map(|i| (ds.inputs[i * ds.p + j] - mean).powi(2)).sum::<f64>() / ds.n as f64;
            assert!((var - 1.0).abs() <= 1e-8, "column {j} var {var}");
        }
    }

    #[test]
    fn teacher_dataset_reproducible() {
        let a = make_synthetic_dataset(32, 6, 3, DatasetKind::TeacherMlp, &RngStream::new(9, 4)).unwrap();
        let b = make_synthetic_dataset(32, 6, 3, DatasetKind::TeacherMlp, &RngStream::new(9, 4)).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.targets, b.targets);
    }
}
