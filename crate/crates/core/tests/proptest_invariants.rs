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

//! Property tests for the structural invariants: eigendecomposition
//! round-trips, HVP bilinearity, estimator mu-independence, the Jury/pole
//! equivalence, and cone preservation of the covariance operators.

use proptest::prelude::*;

use zo_core::covariance::{assemble_operator, CovBlock, CovFamily, CovState, EstimatorVariant};
use zo_core::estimator::central_along;
use zo_core::linalg::{solve_linear_small, sym_eigendecompose, Mat, Spectrum, SymMatrix};
use zo_core::objective::{Objective, QuadraticModel};
use zo_core::rng::RngStream;
use zo_core::stability::jury_local_stability;

fn sym_matrix_strategy(max_dim: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_dim).prop_flat_map(|d| {
        proptest::collection::vec(-5.0f64..5.0, d * (d + 1) / 2).prop_map(move |upper| {
            let mut m = SymMatrix::diagonal(&vec![0.0; d]);
            let mut k = 0;
            for i in 0..d {
                for j in i..d {
                    m.set_sym(i, j, upper[k]);
                    k += 1;
                }
            }
            m
        })
    })
}

fn psd_quad_strategy(max_dim: usize) -> impl Strategy<Value = QuadraticModel> {
    (1..=max_dim).prop_flat_map(|d| {
        proptest::collection::vec(0.05f64..4.0, d)
            .prop_map(move |diag| QuadraticModel::from_diagonal(diag, vec![0.0; d], 0.0).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eigendecompose_round_trip(m in sym_matrix_strategy(8)) {
        let d = m.dim();
        let eig = sym_eigendecompose(&m).unwrap();
        let q = &eig.basis;
        let tol = 1e-8 * (1.0 + m.max_abs());
        for i in 0..d {
            for j in 0..d {
                let mut rec = 0.0;
                let mut orth = 0.0;
                for k in 0..d {
                    rec += q.get(i, k) * eig.values[k] * q.get(j, k);
                    orth += q.get(k, i) * q.get(k, j);
                }
                prop_assert!((rec - m.get(i, j)).abs() <= tol);
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((orth - target).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn hvp_is_bilinear_and_symmetric(
        quad in psd_quad_strategy(6),
        seed in 0u64..1_000_000,
    ) {
        let d = quad.dim();
        let v = RngStream::new(seed, 0).gaussian_vector(d);
        let w = RngStream::new(seed, 1).gaussian_vector(d);
        let x = vec![0.0; d];
        let hv = quad.hvp(&x, &v).unwrap();
        let hw = quad.hvp(&x, &w).unwrap();
        let vhw: f64 = v.iter().zip(&hw).map(|(a, b)| a * b).sum();
        let whv: f64 = w.iter().zip(&hv).map(|(a, b)| a * b).sum();
        let scale = vhw.abs().max(whv.abs()).max(1e-9);
        prop_assert!((vhw - whv).abs() <= 1e-9 * scale);

        let v3: Vec<f64> = v.iter().map(|a| 3.0 * a).collect();
        let hv3 = quad.hvp(&x, &v3).unwrap();
        for (a, b) in hv.iter().zip(&hv3) {
            prop_assert!((3.0 * a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn central_estimate_is_mu_independent(
        quad in psd_quad_strategy(6),
        seed in 0u64..1_000_000,
    ) {
        let d = quad.dim();
        let x = RngStream::new(seed, 2).gaussian_vector(d);
        let u = RngStream::new(seed, 3).gaussian_vector(d);
        let a = central_along(&quad, &x, &u, 1e-6).unwrap();
        let b = central_along(&quad, &x, &u, 1e-3).unwrap();
        let c = central_along(&quad, &x, &u, 1.0).unwrap();
        // The residual mu-dependence is pure cancellation in the function
        // difference, so the scale is set by |f| and |u|, not by the
        // (possibly tiny) estimate entries.
        let f_scale = 1.0 + quad.value(&x).unwrap().abs();
        let u_inf = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * f_scale * (1.0 + u_inf);
        for i in 0..d {
            prop_assert!((a[i] - b[i]).abs() <= tol);
            prop_assert!((b[i] - c[i]).abs() <= tol);
        }
    }

    #[test]
    fn jury_criterion_equals_pole_condition(
        x_frac in 1e-3f64..1.5,
        beta in 0.0f64..0.95,
    ) {
        let pole = 1.0 - beta * beta;
        let x = x_frac * pole;
        prop_assume!((x - pole).abs() > 1e-9);
        prop_assert_eq!(jury_local_stability(x, beta), x < pole);
    }

    #[test]
    fn sphere_vectors_have_exact_norm(dim in 1usize..32, seed in 0u64..1_000_000) {
        let u = RngStream::new(seed, 4).sphere_vector(dim);
        let sq: f64 = u.iter().map(|v| v * v).sum();
        prop_assert!((sq - dim as f64).abs() <= 1e-12);
    }

    #[test]
    fn covariance_operator_preserves_the_cone(
        diag in proptest::collection::vec(0.1f64..3.0, 1..6),
        beta in 0.0f64..0.9,
        eta_frac in 0.05f64..0.95,
        seed in 0u64..1_000_000,
    ) {
        let mut sorted = diag.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let spectrum = Spectrum::new(sorted).unwrap();
        let d = spectrum.len();
        let eta = eta_frac * (1.0 - beta * beta) / spectrum.lambda_max();
        let family = if beta == 0.0 { CovFamily::ZoGd } else { CovFamily::ZoGdm { beta } };
        let op = assemble_operator(&family, &spectrum, eta, EstimatorVariant::Gaussian).unwrap();
        let g = RngStream::new(seed, 5).gaussian_vector(4 * d);
        let blocks = (0..d)
            .map(|i| {
                let (l11, l21, l22) = (g[4 * i], g[4 * i + 1], g[4 * i + 2]);
                CovBlock { w11: l11 * l11, w12: l11 * l21, w22: l21 * l21 + l22 * l22 }
            })
            .collect();
        let next = op.apply(&CovState { blocks });
        for b in &next.blocks {
            prop_assert!(b.min_eigenvalue() >= -1e-10);
        }
    }

    #[test]
    fn linear_solve_multiplies_back(
        entries in proptest::collection::vec(-2.0f64..2.0, 16),
        rhs in proptest::collection::vec(-3.0f64..3.0, 4),
    ) {
        let mut a = Mat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                a.set(i, j, entries[i * 4 + j] + if i == j { 5.0 } else { 0.0 });
            }
        }
        let x = solve_linear_small(&a, &rhs).unwrap();
        let ax = a.matvec(&x);
        let bmax = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..4 {
            prop_assert!((ax[i] - rhs[i]).abs() <= 1e-9 * (1.0 + bmax));
        }
    }
}
