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

//! Fully connected network trained with the squared loss. Hidden layers use
//! tanh (default) or the tanh-form GeLU; the output layer is linear. The
//! loss is normalized by `1/(2n)` over the batch.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::linalg;
use crate::math;
use crate::objective::{fd_hvp, Dataset, Objective};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Gelu,
}

impl Activation {
    #[inline]
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(z),
            Activation::Gelu => {
                let u = SQRT_2_OVER_PI * (z + GELU_A * z * z * z);
                0.5 * z * (1.0 + math::tanh(u))
            }
        }
    }

    #[inline]
    fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = math::tanh(z);
                1.0 - t * t
            }
            Activation::Gelu => {
                let u = SQRT_2_OVER_PI * (z + GELU_A * z * z * z);
                let t = math::tanh(u);
                0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_A * z * z)
            }
        }
    }
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_A: f64 = 0.044_715;

/// Multilayer perceptron over a fixed dataset; the parameter vector is the
/// argument of every [`Objective`] call. Layout per layer: row-major weights
/// `(out x in)` followed by `out` biases.
#[derive(Debug, Clone)]
pub struct MlpModel {
    layer_dims: Vec<(usize, usize)>,
    activation: Activation,
    data: Dataset,
}

impl MlpModel {
    pub fn new(widths: &[usize], activation: Activation, data: Dataset) -> Result<Self> {
        if widths.len() < 2 {
            return Err(CoreError::InvalidParameter("MLP needs at least input and output widths".into()));
        }
        if widths[0] != data.p {
            return Err(CoreError::DimMismatch { expected: data.p, got: widths[0], what: "MLP input width" });
        }
        if *widths.last().unwrap() != data.c {
            return Err(CoreError::DimMismatch {
                expected: data.c,
                got: *widths.last().unwrap(),
                what: "MLP output width",
            });
        }
        let layer_dims = widths.windows(2).map(|w| (w[0], w[1])).collect();
        Ok(Self { layer_dims, activation, data })
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims.iter().map(|&(i, o)| (i + 1) * o).sum()
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// LeCun-style Gaussian init: `W ~ N(0, (gain / sqrt(fan_in))^2)`, zero biases.
    pub fn init_params(&self, gain: f64, stream: &RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        let mut x = vec![0.0f64; self.param_count()];
        let mut off = 0usize;
        for &(fan_in, fan_out) in &self.layer_dims {
            let sd = gain / math::sqrt(fan_in as f64);
            for w in x[off..off + fan_in * fan_out].iter_mut() {
                *w = sd * crate::rng::gaussian_fill(1, &mut rng)[0];
            }
            off += (fan_in + 1) * fan_out;
        }
        x
    }

    fn check_params(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.param_count() {
            return Err(CoreError::DimMismatch {
                expected: self.param_count(),
                got: x.len(),
                what: "MLP parameter vector",
            });
        }
        Ok(())
    }

    /// Forward pass for one sample; returns activations per layer when
    /// `keep` is set (for backprop).
    fn forward_sample(
        &self,
        x: &[f64],
        input: &[f64],
        keep: Option<&mut Vec<Vec<f64>>>,
    ) -> Result<Vec<f64>> {
        let n_layers = self.layer_dims.len();
        let mut h: Vec<f64> = input.to_vec();
        let mut keep = keep;
        if let Some(store) = keep.as_deref_mut() {
            store.push(h.clone());
        }
        let mut off = 0usize;
        for (l, &(fan_in, fan_out)) in self.layer_dims.iter().enumerate() {
            let w = &x[off..off + fan_in * fan_out];
            let b = &x[off + fan_in * fan_out..off + (fan_in + 1) * fan_out];
            let mut z = vec![0.0f64; fan_out];
            for o in 0..fan_out {
                z[o] = linalg::dot(&w[o * fan_in..(o + 1) * fan_in], &h) + b[o];
            }
            let last = l + 1 == n_layers;
            let out: Vec<f64> =
                if last { z.clone() } else { z.iter().map(|&v| self.activation.apply(v)).collect() };
            if out.iter().any(|v| !v.is_finite()) {
                return Err(CoreError::NonFinite("MLP activation".into()));
            }
            if let Some(store) = keep.as_deref_mut() {
                store.push(z); // pre-activations; activation re-applied in backprop
            }
            h = out;
            off += (fan_in + 1) * fan_out;
        }
        Ok(h)
    }

    /// Squared loss `1/(2m) sum ||f(x_i) - y_i||^2` over the given rows
    /// (all rows when `batch` is `None`).
    pub fn value_on(&self, x: &[f64], batch: Option<&[usize]>) -> Result<f64> {
        self.check_params(x)?;
        let rows = BatchRows::new(self.data.n, batch);
        let m = rows.len();
        let mut loss = 0.0f64;
        for i in rows.iter() {
            let out = self.forward_sample(x, self.data.input_row(i), None)?;
            let y = self.data.target_row(i);
            loss += out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();
        }
        Ok(loss / (2.0 * m as f64))
    }

    /// Loss and exact reverse-mode gradient over the given rows.
    pub fn value_grad_on(&self, x: &[f64], batch: Option<&[usize]>) -> Result<(f64, Vec<f64>)> {
        self.check_params(x)?;
        let rows = BatchRows::new(self.data.n, batch);
        let m = rows.len() as f64;
        let n_layers = self.layer_dims.len();
        let mut grad = vec![0.0f64; x.len()];
        let mut loss = 0.0f64;

        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0usize;
        for &(fan_in, fan_out) in &self.layer_dims {
            offsets.push(off);
            off += (fan_in + 1) * fan_out;
        }

        for i in rows.iter() {
            // store[0] = input, store[l+1] = pre-activations of layer l
            let mut store: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
            let out = self.forward_sample(x, self.data.input_row(i), Some(&mut store))?;
            let y = self.data.target_row(i);
            loss += out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)).sum::<f64>();

            // delta at the linear output layer
            let mut delta: Vec<f64> = out.iter().zip(y).map(|(o, t)| (o - t) / m).collect();
            for l in (0..n_layers).rev() {
                let (fan_in, fan_out) = self.layer_dims[l];
                let off = offsets[l];
                // activation of the previous layer (inputs for l = 0)
                let h_prev: Vec<f64> = if l == 0 {
                    store[0].clone()
                } else {
                    store[l].iter().map(|&z| self.activation.apply(z)).collect()
                };
                for o in 0..fan_out {
                    let d = delta[o];
                    let wrow = off + o * fan_in;
                    for j in 0..fan_in {
                        grad[wrow + j] += d * h_prev[j];
                    }
                    grad[off + fan_in * fan_out + o] += d;
                }
                if l > 0 {
                    let (_, _) = self.layer_dims[l];
                    let w = &x[off..off + fan_in * fan_out];
                    let z_prev = &store[l];
                    let mut next = vec![0.0f64; fan_in];
                    for j in 0..fan_in {
                        let mut s = 0.0;
                        for o in 0..fan_out {
                            s += w[o * fan_in + j] * delta[o];
                        }
                        next[j] = s * self.activation.derivative(z_prev[j]);
                    }
                    delta = next;
                }
            }
        }
        Ok((loss / (2.0 * m), grad))
    }

    pub fn gradient_on(&self, x: &[f64], batch: Option<&[usize]>) -> Result<Vec<f64>> {
        Ok(self.value_grad_on(x, batch)?.1)
    }

    /// Restriction of the objective to a fixed subset of dataset rows.
    pub fn batch_view<'a>(&'a self, rows: &'a [usize]) -> MlpBatch<'a> {
        MlpBatch { model: self, rows }
    }
}

impl Objective for MlpModel {
    fn dim(&self) -> usize {
        self.param_count()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.value_on(x, None)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.gradient_on(x, None)
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        fd_hvp(self, x, v)
    }
}

/// Batch-restricted view of an [`MlpModel`].
pub struct MlpBatch<'a> {
    model: &'a MlpModel,
    rows: &'a [usize],
}

impl Objective for MlpBatch<'_> {
    fn dim(&self) -> usize {
        self.model.param_count()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.model.value_on(x, Some(self.rows))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.model.gradient_on(x, Some(self.rows))
    }

    fn hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        fd_hvp(self, x, v)
    }
}

enum BatchRows<'a> {
    All(usize),
    Subset(&'a [usize]),
}

impl<'a> BatchRows<'a> {
    fn new(n: usize, batch: Option<&'a [usize]>) -> Self {
        match batch {
            None => BatchRows::All(n),
            Some(rows) => BatchRows::Subset(rows),
        }
    }

    fn len(&self) -> usize {
        match self {
            BatchRows::All(n) => *n,
            BatchRows::Subset(rows) => rows.len(),
        }
    }

    fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let (n, rows) = match self {
            BatchRows::All(n) => (*n, None),
            BatchRows::Subset(r) => (r.len(), Some(*r)),
        };
        (0..n).map(move |k| match rows {
            None => k,
            Some(r) => r[k],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{make_synthetic_dataset, Dataset, DatasetKind, TargetKind};

    fn small_dataset() -> Dataset {
        make_synthetic_dataset(16, 8, 4, DatasetKind::GaussianClusters, &RngStream::new(3, 0)).unwrap()
    }

    #[test]
    fn zero_network_zero_targets() {
        let inputs = RngStream::new(4, 0).gaussian_vector(6 * 3);
        let data = Dataset::new(inputs, vec![0.0; 6 * 2], 6, 3, 2, TargetKind::Regression).unwrap();
        let mlp = MlpModel::new(&[3, 5, 2], Activation::Tanh, data).unwrap();
        let x = vec![0.0; mlp.param_count()];
        let (loss, grad) = mlp.value_grad_on(&x, None).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_value_finite_differences() {
        let data = make_synthetic_dataset(16, 8, 4, DatasetKind::GaussianClusters, &RngStream::new(5, 0))
            .unwrap();
        for act in [Activation::Tanh, Activation::Gelu] {
            let mlp = MlpModel::new(&[8, 16, 4], act, data.clone()).unwrap();
            for rep in 0..20u64 {
                let x = mlp.init_params(1.5, &RngStream::new(50, rep));
                let (_, grad) = mlp.value_grad_on(&x, None).unwrap();
                // Spot-check a deterministic subset of coordinates per point.
                let h = 1e-5;
                for k in (rep as usize % 7..x.len()).step_by(23) {
                    let mut xp = x.clone();
                    xp[k] += h;
                    let mut xm = x.clone();
                    xm[k] -= h;
                    let fd = (mlp.value(&xp).unwrap() - mlp.value(&xm).unwrap()) / (2.0 * h);
                    let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
                    assert!(rel <= 1e-4, "coord {k}: fd {fd} vs grad {}", grad[k]);
                }
            }
        }
    }

    #[test]
    fn linear_layer_matches_least_squares_gradient() {
        // Single linear layer on an identity-like dataset: closed-form
        // gradient (1/n) sum (Wx + b - y) x^T.
        let n = 5usize;
        let p = 3usize;
        let c = 2usize;
        let inputs = RngStream::new(6, 0).gaussian_vector(n * p);
        let targets = RngStream::new(6, 1).gaussian_vector(n * c);
        let data = Dataset::new(inputs.clone(), targets.clone(), n, p, c, TargetKind::Regression).unwrap();
        let mlp = MlpModel::new(&[p, c], Activation::Tanh, data).unwrap();
        let x = RngStream::new(6, 2).gaussian_vector(mlp.param_count());
        let (_, grad) = mlp.value_grad_on(&x, None).unwrap();

        let mut expect = vec![0.0f64; (p + 1) * c];
        for i in 0..n {
            let xi = &inputs[i * p..(i + 1) * p];
            for o in 0..c {
                let w = &x[o * p..(o + 1) * p];
                let b = x[p * c + o];
                let r = (linalg::dot(w, xi) + b - targets[i * c + o]) / n as f64;
                for j in 0..p {
                    expect[o * p + j] += r * xi[j];
                }
                expect[p * c + o] += r;
            }
        }
        for (g, e) in grad.iter().zip(&expect) {
            assert!((g - e).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn hvp_linearity_and_symmetry() {
        let mlp = MlpModel::new(&[8, 16, 4], Activation::Tanh, small_dataset()).unwrap();
        let x = mlp.init_params(1.0, &RngStream::new(8, 0));
        let v = RngStream::new(8, 1).gaussian_vector(mlp.param_count());
        let w = RngStream::new(8, 2).gaussian_vector(mlp.param_count());

        let hv = mlp.hvp(&x, &v).unwrap();
        let v2: Vec<f64> = v.iter().map(|a| 2.0 * a).collect();
        let hv2 = mlp.hvp(&x, &v2).unwrap();
        for (a, b) in hv.iter().zip(&hv2) {
            assert!((2.0 * a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} {b}");
        }

        let hw = mlp.hvp(&x, &w).unwrap();
        let whv = linalg::dot(&w, &hv);
        let vhw = linalg::dot(&v, &hw);
        let rel = (whv - vhw).abs() / whv.abs().max(vhw.abs()).max(1e-12);
        assert!(rel <= 1e-5, "w.Hv = {whv}, v.Hw = {vhw}");
    }

    #[test]
    fn batch_view_of_all_rows_equals_full() {
        let mlp = MlpModel::new(&[8, 16, 4], Activation::Tanh, small_dataset()).unwrap();
        let x = mlp.init_params(1.0, &RngStream::new(12, 0));
        let rows: Vec<usize> = (0..mlp.dataset().n).collect();
        let view = mlp.batch_view(&rows);
        assert_eq!(view.value(&x).unwrap(), mlp.value(&x).unwrap());
        assert_eq!(view.gradient(&x).unwrap(), mlp.gradient(&x).unwrap());
    }

    #[test]
    fn rejects_zero_direction_and_bad_dims() {
        let mlp = MlpModel::new(&[8, 16, 4], Activation::Tanh, small_dataset()).unwrap();
        let x = vec![0.1; mlp.param_count()];
        assert!(mlp.hvp(&x, &vec![0.0; mlp.param_count()]).is_err());
        assert!(mlp.value(&[0.0; 3]).is_err());
    }
}
