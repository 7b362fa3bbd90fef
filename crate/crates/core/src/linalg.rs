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

//! Dense symmetric linear algebra for small matrices: Jacobi
//! eigendecomposition, power iteration, Hutchinson trace estimation, and
//! LU solves. Everything is sized for `d <= 64`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::math;
use crate::rng::{self, RngStream};

/// Absolute tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

pub fn scale(a: &mut [f64], s: f64) {
    for x in a.iter_mut() {
        *x *= s;
    }
}

/// `y += s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

// ---------------------------------------------------------------------------
// General dense matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix, not necessarily symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            out[i] = dot(&self.data[i * self.cols..(i + 1) * self.cols], v);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(math::abs(x)))
    }

    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().map(|x| math::abs(*x)).sum())
            .fold(0.0f64, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Symmetric matrix and spectra
// ---------------------------------------------------------------------------

/// Dense symmetric matrix, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major entries, rejecting asymmetry beyond [`SYMMETRY_TOL`].
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(CoreError::InvalidParameter("SymMatrix dim must be >= 1".into()));
        }
        if data.len() != dim * dim {
            return Err(CoreError::DimMismatch { expected: dim * dim, got: data.len(), what: "SymMatrix entries" });
        }
        let mut max_asym = 0.0f64;
        for i in 0..dim {
            for j in (i + 1)..dim {
                max_asym = max_asym.max(math::abs(data[i * dim + j] - data[j * dim + i]));
            }
        }
        if max_asym > SYMMETRY_TOL {
            return Err(CoreError::NotSymmetric { max_asym, tol: SYMMETRY_TOL });
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = entries[i];
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Sets the (i, j) and (j, i) entries together.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            out[i] = dot(&self.data[i * self.dim..(i + 1) * self.dim], v);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(math::abs(x)))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_mat(&self) -> Mat {
        Mat { rows: self.dim, cols: self.dim, data: self.data.clone() }
    }
}

/// Sorted nonnegative eigenvalue list; the input to every stability formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    /// Sorts descending; eigenvalues in `[-1e-12, 0)` are clamped to zero,
    /// anything more negative is rejected, as is an all-zero spectrum.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::InvalidParameter("spectrum must be nonempty".into()));
        }
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(CoreError::NonFinite("spectrum entry".into()));
            }
            if *v < 0.0 {
                if *v >= -1e-12 {
                    *v = 0.0;
                } else {
                    return Err(CoreError::InvalidParameter(format!(
                        "spectrum entry {v} is negative beyond tolerance"
                    )));
                }
            }
        }
        values.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if values[0] == 0.0 {
            return Err(CoreError::ZeroSpectrum);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Eigendecomposition of a symmetric matrix: values descending, eigenvectors
/// as columns of an orthonormal basis.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Row-major `dim x dim`; column k is the eigenvector of `values[k]`.
    pub basis: Mat,
}

impl SymEigen {
    /// Interprets the eigenvalues as a PSD spectrum, clamping tiny negatives.
    pub fn spectrum(&self) -> Result<Spectrum> {
        Spectrum::new(self.values.clone())
    }
}

/// Cyclic Jacobi sweeps until the off-diagonal Frobenius mass drops below
/// `1e-12 * max(1, ||m||_F)`.
pub fn sym_eigendecompose(m: &SymMatrix) -> Result<SymEigen> {
    let n = m.dim();
    let mut a = m.data.clone();
    let mut q = Mat::identity(n);
    let frob = math::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let tol = 1e-12 * frob.max(1.0);

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        math::sqrt(s)
    };

    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = a[p * n + r];
                if math::abs(apr) == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let arr = a[r * n + r];
                let theta = 0.5 * (arr - app) / apr;
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::hypot(1.0, theta))
                } else {
                    -1.0 / (-theta + math::hypot(1.0, theta))
                };
                let c = 1.0 / math::hypot(1.0, t);
                let s = t * c;
                // Apply the rotation G(p, r) on both sides and accumulate in q.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akr = a[k * n + r];
                    a[k * n + p] = c * akp - s * akr;
                    a[k * n + r] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let ark = a[r * n + k];
                    a[p * n + k] = c * apk - s * ark;
                    a[r * n + k] = s * apk + c * ark;
                }
                for k in 0..n {
                    let qkp = q.get(k, p);
                    let qkr = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkr);
                    q.set(k, r, s * qkp + c * qkr);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut basis = Mat::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for k in 0..n {
            basis.set(k, new_col, q.get(k, old_col));
        }
    }
    Ok(SymEigen { values, basis })
}

// ---------------------------------------------------------------------------
// Power iteration
// ---------------------------------------------------------------------------

/// Result of a top-eigenvalue power iteration.
#[derive(Debug, Clone)]
pub struct TopEig {
    pub value: f64,
    /// Set when the operator annihilated the start vector.
    pub degenerate: bool,
    /// Rayleigh quotient after each iteration.
    pub rayleigh_history: Vec<f64>,
}

/// Aitken delta-squared extrapolation of a geometrically converging tail.
/// Returns `None` unless the last three entries contract.
pub(crate) fn aitken_tail(history: &[f64]) -> Option<f64> {
    let n = history.len();
    if n < 3 {
        return None;
    }
    let (r0, r1, r2) = (history[n - 3], history[n - 2], history[n - 1]);
    let d0 = r1 - r0;
    let d1 = r2 - r1;
    if math::abs(d1) >= math::abs(d0) {
        return None;
    }
    let denom = d1 - d0;
    if math::abs(denom) < f64::EPSILON * (math::abs(r2) + 1.0) {
        return None;
    }
    let out = r2 - d1 * d1 / denom;
    out.is_finite().then_some(out)
}

/// Estimates the top eigenvalue of a symmetric PSD operator given only
/// matrix-vector products. The start vector is a Gaussian draw from `stream`;
/// the returned value is the final Rayleigh quotient with delta-squared
/// acceleration applied to its tail.
pub fn power_iteration_top_eig<F>(
    mut apply: F,
    dim: usize,
    iters: usize,
    stream: &RngStream,
) -> Result<TopEig>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    assert!(iters >= 1);
    let mut v = stream.gaussian_vector(dim);
    let nv = norm2(&v);
    if nv == 0.0 {
        return Ok(TopEig { value: 0.0, degenerate: true, rayleigh_history: Vec::new() });
    }
    scale(&mut v, 1.0 / nv);
    let mut history = Vec::with_capacity(iters);
    for _ in 0..iters {
        let w = apply(&v)?;
        let rq = dot(&v, &w);
        history.push(rq);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(TopEig { value: 0.0, degenerate: true, rayleigh_history: history });
        }
        v = w;
        scale(&mut v, 1.0 / nw);
    }
    let last = *history.last().unwrap();
    let value = aitken_tail(&history).unwrap_or(last);
    Ok(TopEig { value, degenerate: false, rayleigh_history: history })
}

// ---------------------------------------------------------------------------
// Hutchinson trace estimation
// ---------------------------------------------------------------------------

/// Monte-Carlo trace estimate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct TraceEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// `(1/probes) * sum z^T (A z)` over Rademacher probes `z`.
pub fn hutchinson_trace<F>(
    mut apply: F,
    dim: usize,
    probes: usize,
    stream: &RngStream,
) -> Result<TraceEstimate>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    assert!(probes >= 1);
    let mut rng = stream.rng();
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for _ in 0..probes {
        let z = rng::rademacher_fill(dim, &mut rng);
        let az = apply(&z)?;
        let q = dot(&z, &az);
        sum += q;
        sum_sq += q * q;
    }
    let n = probes as f64;
    let mean = sum / n;
    let std_error = if probes > 1 {
        let var = (sum_sq - n * mean * mean).max(0.0) / (n - 1.0);
        math::sqrt(var / n)
    } else {
        f64::INFINITY
    };
    Ok(TraceEstimate { mean, std_error })
}

// ---------------------------------------------------------------------------
// Small dense linear solves
// ---------------------------------------------------------------------------

/// Condition threshold above which a solve is refused.
pub const COND_LIMIT: f64 = 1e12;

/// Solves `A x = b` for a small square system by LU with partial pivoting.
/// Rejects systems whose infinity-norm condition estimate exceeds 1e12.
pub fn solve_linear_small(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n {
        return Err(CoreError::DimMismatch { expected: n, got: a.cols, what: "square matrix" });
    }
    if b.len() != n {
        return Err(CoreError::DimMismatch { expected: n, got: b.len(), what: "rhs length" });
    }
    let lu = LuFactors::new(a)?;
    let cond = a.inf_norm() * lu.inverse_inf_norm();
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(CoreError::IllConditioned { cond_estimate: cond });
    }
    Ok(lu.solve(b))
}

pub(crate) struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl LuFactors {
    pub(crate) fn new(a: &Mat) -> Result<Self> {
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut max = math::abs(lu[k * n + k]);
            for i in (k + 1)..n {
                let v = math::abs(lu[i * n + k]);
                if v > max {
                    max = v;
                    p = i;
                }
            }
            if max == 0.0 {
                return Err(CoreError::IllConditioned { cond_estimate: f64::INFINITY });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                for j in (k + 1)..n {
                    lu[i * n + j] -= f * lu[k * n + j];
                }
            }
        }
        Ok(Self { n, lu, piv })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    fn inverse_inf_norm(&self) -> f64 {
        let n = self.n;
        let mut rowsum = vec![0.0f64; n];
        let mut e = vec![0.0f64; n];
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                rowsum[i] += math::abs(col[i]);
            }
        }
        rowsum.into_iter().fold(0.0f64, f64::max)
    }
}
