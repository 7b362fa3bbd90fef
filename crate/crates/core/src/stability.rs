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

//! Closed-form stability calculus.
//!
//! First-order methods are stable iff the step size stays below a threshold
//! fixed by the top eigenvalue of the (preconditioned) Hessian. Their
//! zeroth-order counterparts share that threshold in the mean, but
//! mean-square stability is governed by a scalar condition over the whole
//! spectrum:
//!
//! - ZO-GD:   `sum_i eta li / (2 (1 - eta li)) = 1`, valid for `eta l1 < 1`
//! - ZO-GDM:  `sum_i eta li / (2 (1-b) (1 - eta li / (1-b^2))) = 1`,
//!   valid for `eta l1 < 1 - b^2`
//! - Frozen ZO-Adam: `sum_i eta ti / (2 (1 - eta ti / (1+b1))) = 1` over the
//!   eigenvalues `ti` of `P^{-1} H`, valid for `eta t1 < 1 + b1`
//!
//! Each condition is strictly increasing in `eta`, so the critical step size
//! is found by bisection, and it is sandwiched by trace/top-eigenvalue
//! bounds that depend only on two curvature scalars.

use alloc::format;

use crate::error::{CoreError, Result};
use crate::linalg::Spectrum;
use crate::math;

/// Optimizer family a stability question is about. For the Adam families the
/// accompanying spectrum must be that of the preconditioned Hessian
/// `P^{-1} H` (requires `P H = H P`; non-commuting pairs are out of scope).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityFamily {
    ZoGd,
    ZoGdm { beta: f64 },
    FrozenZoAdam { beta1: f64 },
    Gd,
    Gdm { beta: f64 },
    FrozenAdam { beta1: f64 },
}

impl StabilityFamily {
    pub fn is_zeroth_order(&self) -> bool {
        matches!(
            self,
            StabilityFamily::ZoGd | StabilityFamily::ZoGdm { .. } | StabilityFamily::FrozenZoAdam { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, b: f64| {
            if !(0.0..1.0).contains(&b) {
                Err(CoreError::InvalidParameter(format!("{name} must be in [0, 1), got {b}")))
            } else {
                Ok(())
            }
        };
        match self {
            StabilityFamily::ZoGdm { beta } | StabilityFamily::Gdm { beta } => check("beta", *beta),
            StabilityFamily::FrozenZoAdam { beta1 } | StabilityFamily::FrozenAdam { beta1 } => {
                check("beta1", *beta1)
            }
            _ => Ok(()),
        }
    }

    /// Pole of the per-eigenvalue term, in units of `eta * lambda`.
    pub fn pole(&self) -> Result<f64> {
        match self {
            StabilityFamily::ZoGd => Ok(1.0),
            StabilityFamily::ZoGdm { beta } => Ok(1.0 - beta * beta),
            StabilityFamily::FrozenZoAdam { beta1 } => Ok(1.0 + beta1),
            _ => Err(CoreError::InvalidParameter(
                "mean-square condition is only defined for zeroth-order families".into(),
            )),
        }
    }

    fn fo_counterpart(&self) -> StabilityFamily {
        match *self {
            StabilityFamily::ZoGd => StabilityFamily::Gd,
            StabilityFamily::ZoGdm { beta } => StabilityFamily::Gdm { beta },
            StabilityFamily::FrozenZoAdam { beta1 } => StabilityFamily::FrozenAdam { beta1 },
            other => other,
        }
    }
}

/// Spectrum plus family tag; the unit every solver consumes.
#[derive(Debug, Clone)]
pub struct StabilityQuery {
    pub spectrum: Spectrum,
    pub family: StabilityFamily,
}

impl StabilityQuery {
    pub fn new(spectrum: Spectrum, family: StabilityFamily) -> Result<Self> {
        family.validate()?;
        Ok(Self { spectrum, family })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepsizeClass {
    Stable,
    Critical,
    Unstable,
}

/// Critical step sizes with the trace/top-eigenvalue bounds.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub eta_mean_star: f64,
    pub eta_ms_star: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Classification of the probe step size, when one was supplied.
    pub probe: Option<(f64, StepsizeClass)>,
}

/// Relative tolerance for calling a step size critical.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Critical step size of the deterministic (mean) dynamics. For zeroth-order
/// families this equals the threshold of the first-order counterpart.
pub fn fo_critical_stepsize(query: &StabilityQuery) -> Result<f64> {
    query.family.validate()?;
    let lmax = query.spectrum.lambda_max();
    // Spectrum construction guarantees lmax > 0.
    let eta = match query.family.fo_counterpart() {
        StabilityFamily::Gd => 2.0 / lmax,
        StabilityFamily::Gdm { beta } => 2.0 * (1.0 + beta) / lmax,
        StabilityFamily::FrozenAdam { beta1 } => 2.0 * (1.0 + beta1) / ((1.0 - beta1) * lmax),
        _ => unreachable!(),
    };
    Ok(eta)
}

/// Value of the mean-square condition `S(eta)`; zero eigenvalues contribute
/// exactly zero. Rejected at or above the pole `eta lambda_max = pole`.
pub fn ms_condition_value(spectrum: &Spectrum, eta: f64, family: &StabilityFamily) -> Result<f64> {
    family.validate()?;
    let pole = family.pole()?;
    if !(eta > 0.0) {
        return Err(CoreError::OutOfDomain(format!("eta must be > 0, got {eta}")));
    }
    if eta * spectrum.lambda_max() >= pole {
        return Err(CoreError::OutOfDomain(format!(
            "eta * lambda_max = {} is at or above the pole {pole}",
            eta * spectrum.lambda_max()
        )));
    }
    let s = match family {
        StabilityFamily::ZoGd => spectrum
            .values()
            .iter()
            .map(|&l| {
                let x = eta * l;
                x / (2.0 * (1.0 - x))
            })
            .sum(),
        StabilityFamily::ZoGdm { beta } => spectrum
            .values()
            .iter()
            .map(|&l| {
                let x = eta * l;
                x / (2.0 * (1.0 - beta) * (1.0 - x / (1.0 - beta * beta)))
            })
            .sum(),
        StabilityFamily::FrozenZoAdam { beta1 } => spectrum
            .values()
            .iter()
            .map(|&l| {
                let x = eta * l;
                x / (2.0 * (1.0 - x / (1.0 + beta1)))
            })
            .sum(),
        _ => unreachable!("pole() already rejected first-order families"),
    };
    Ok(s)
}

/// Trace/top-eigenvalue bounds on the mean-square critical step size.
pub fn ms_bounds(spectrum: &Spectrum, family: &StabilityFamily) -> Result<(f64, f64)> {
    let tr = spectrum.trace();
    let lmax = spectrum.lambda_max();
    match family {
        StabilityFamily::ZoGd => Ok((2.0 / (tr + 2.0 * lmax), 2.0 / tr)),
        StabilityFamily::ZoGdm { beta } => Ok((
            2.0 * (1.0 - beta) / (tr + 2.0 * lmax / (1.0 + beta)),
            2.0 * (1.0 - beta) / tr,
        )),
        StabilityFamily::FrozenZoAdam { beta1 } => {
            Ok((2.0 / (tr + 2.0 * lmax / (1.0 + beta1)), 2.0 / tr))
        }
        _ => Err(CoreError::InvalidParameter(
            "mean-square bounds are only defined for zeroth-order families".into(),
        )),
    }
}

/// Solves `S(eta) = 1` by bisection on `(0, pole / lambda_max)`; `S` is
/// strictly increasing there, so the bracket is always valid. For
/// first-order families the deterministic threshold is returned with
/// coinciding bounds.
pub fn solve_ms_critical_stepsize(query: &StabilityQuery) -> Result<StabilityReport> {
    solve_with_probe(query, None)
}

/// [`solve_ms_critical_stepsize`] plus classification of a probe step size.
pub fn solve_with_probe(query: &StabilityQuery, probe_eta: Option<f64>) -> Result<StabilityReport> {
    query.family.validate()?;
    let eta_mean_star = fo_critical_stepsize(query)?;

    let (eta_ms_star, lower_bound, upper_bound) = if query.family.is_zeroth_order() {
        let pole = query.family.pole()?;
        let hi_limit = pole / query.spectrum.lambda_max();
        let mut lo = 0.0f64;
        let mut hi = hi_limit;
        let tol = 1e-12 * hi_limit;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            match ms_condition_value(&query.spectrum, mid, &query.family) {
                Ok(s) if s < 1.0 => lo = mid,
                Ok(_) => hi = mid,
                Err(_) => hi = mid,
            }
        }
        let eta = 0.5 * (lo + hi);
        let (lb, ub) = ms_bounds(&query.spectrum, &query.family)?;
        (eta, lb, ub)
    } else {
        (eta_mean_star, eta_mean_star, eta_mean_star)
    };

    let probe = match probe_eta {
        Some(eta) => Some((eta, classify_stepsize(query, eta)?)),
        None => None,
    };
    Ok(StabilityReport { eta_mean_star, eta_ms_star, lower_bound, upper_bound, probe })
}

/// Stable iff below the pole with `S(eta) < 1 - 1e-12`; critical iff
/// `|S(eta) - 1| <= 1e-12` below the pole; unstable otherwise. First-order
/// families classify against their deterministic threshold.
pub fn classify_stepsize(query: &StabilityQuery, eta: f64) -> Result<StepsizeClass> {
    if !(eta > 0.0) {
        return Err(CoreError::OutOfDomain(format!("eta must be > 0, got {eta}")));
    }
    if query.family.is_zeroth_order() {
        match ms_condition_value(&query.spectrum, eta, &query.family) {
            Ok(s) => {
                if math::abs(s - 1.0) <= CRITICAL_TOL {
                    Ok(StepsizeClass::Critical)
                } else if s < 1.0 {
                    Ok(StepsizeClass::Stable)
                } else {
                    Ok(StepsizeClass::Unstable)
                }
            }
            Err(CoreError::OutOfDomain(_)) => Ok(StepsizeClass::Unstable),
            Err(e) => Err(e),
        }
    } else {
        let star = fo_critical_stepsize(query)?;
        if math::abs(eta - star) <= CRITICAL_TOL * star {
            Ok(StepsizeClass::Critical)
        } else if eta < star {
            Ok(StepsizeClass::Stable)
        } else {
            Ok(StepsizeClass::Unstable)
        }
    }
}

// ---------------------------------------------------------------------------
// Local-block algebra
// ---------------------------------------------------------------------------

/// Strict Jury criterion on the characteristic cubic of the local
/// second-moment block at `x = eta * lambda`. Equivalent to
/// `0 < x < 1 - beta^2`.
pub fn jury_local_stability(x: f64, beta: f64) -> bool {
    let b = beta;
    let c1 = -b * b + 2.0 * b * x - b - 2.0 * x * x + 2.0 * x - 1.0;
    let c2 = b * (b * b + b + 1.0 - 2.0 * (b + 1.0) * x);
    let c3 = -b * b * b;
    // All roots of r^3 + c1 r^2 + c2 r + c3 lie strictly inside the unit circle iff:
    let cond1 = math::abs(c3) < 1.0;
    let p1 = 1.0 + c1 + c2 + c3;
    let cond2 = p1 > 0.0;
    let cond3 = 1.0 - c1 + c2 - c3 > 0.0;
    let cond4 = 1.0 - c3 * c3 > math::abs(c2 - c1 * c3);
    cond1 && cond2 && cond3 && cond4
}

/// `(1 + beta) / (2 x (1 - beta^2 - x))`: the `(1,1)` entry of
/// `(Id - M_i)^{-1} Q` for the local block at `x = eta * lambda_i`.
pub fn gamma_local(x: f64, beta: f64) -> Result<f64> {
    let pole = 1.0 - beta * beta;
    if !(x > 0.0 && x < pole) {
        return Err(CoreError::OutOfDomain(format!(
            "gamma is defined for 0 < x < 1 - beta^2 = {pole}, got x = {x}"
        )));
    }
    Ok((1.0 + beta) / (2.0 * x * (pole - x)))
}

// ---------------------------------------------------------------------------
// Tracked stability band
// ---------------------------------------------------------------------------

/// `(lower_term, threshold, upper_term)` of the curvature band tracked
/// during training; the Adam variant expects preconditioned curvature.
pub fn tracked_band(
    family: &StabilityFamily,
    trace: f64,
    lambda_max: f64,
    eta: f64,
) -> Result<(f64, f64, f64)> {
    if !(eta > 0.0) {
        return Err(CoreError::InvalidParameter(format!("eta must be > 0, got {eta}")));
    }
    family.validate()?;
    match family {
        StabilityFamily::ZoGd => Ok((trace, 2.0 / eta, trace + 2.0 * lambda_max)),
        StabilityFamily::ZoGdm { beta } => Ok((
            trace,
            2.0 * (1.0 - beta) / eta,
            trace + 2.0 * lambda_max / (1.0 + beta),
        )),
        StabilityFamily::FrozenZoAdam { beta1 } => Ok((
            trace,
            2.0 / eta,
            trace + 2.0 * lambda_max / (1.0 + beta1),
        )),
        _ => Err(CoreError::InvalidParameter(
            "tracked band is defined for zeroth-order families".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::rng::RngStream;
    use alloc::vec;
    use alloc::vec::Vec;

    fn spec(values: &[f64]) -> Spectrum {
        Spectrum::new(values.to_vec()).unwrap()
    }

    fn query(values: &[f64], family: StabilityFamily) -> StabilityQuery {
        StabilityQuery::new(spec(values), family).unwrap()
    }

    #[test]
    fn fo_thresholds() {
        assert_eq!(fo_critical_stepsize(&query(&[1.0], StabilityFamily::Gd)).unwrap(), 2.0);
        assert_eq!(
            fo_critical_stepsize(&query(&[2.0], StabilityFamily::Gdm { beta: 0.5 })).unwrap(),
            1.5
        );
        let adam = fo_critical_stepsize(&query(&[1.0], StabilityFamily::FrozenAdam { beta1: 0.9 })).unwrap();
        assert!((adam - 38.0).abs() < 1e-12);
    }

    #[test]
    fn ms_condition_values() {
        let s = ms_condition_value(&spec(&[1.0]), 2.0 / 3.0, &StabilityFamily::ZoGd).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        // S -> 0 monotonically as eta -> 0+.
        let spectrum = spec(&[2.0, 1.0, 0.5]);
        let mut last = f64::INFINITY;
        for k in 1..=6 {
            let eta = 0.4 / 10f64.powi(k);
            let s = ms_condition_value(&spectrum, eta, &StabilityFamily::ZoGd).unwrap();
            assert!(s < last && s > 0.0);
            last = s;
        }
        // ZO-GDM at the hand-solved critical step size 2(1-b^2)/(3+b).
        let s = ms_condition_value(&spec(&[1.0]), 3.0 / 7.0, &StabilityFamily::ZoGdm { beta: 0.5 }).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ms_condition_rejects_pole() {
        assert!(matches!(
            ms_condition_value(&spec(&[1.0]), 1.0, &StabilityFamily::ZoGd),
            Err(CoreError::OutOfDomain(_))
        ));
    }

    #[test]
    fn closed_form_critical_stepsizes() {
        let cases: Vec<(StabilityQuery, f64)> = vec![
            (query(&[1.0], StabilityFamily::ZoGd), 2.0 / 3.0),
            (query(&[1.0, 1.0], StabilityFamily::ZoGd), 0.5),
            (query(&[1.0, 1.0, 1.0, 1.0], StabilityFamily::ZoGd), 1.0 / 3.0),
            (query(&[1.0], StabilityFamily::ZoGdm { beta: 0.5 }), 3.0 / 7.0),
        ];
        for (q, expect) in cases {
            let rep = solve_ms_critical_stepsize(&q).unwrap();
            assert!(
                (rep.eta_ms_star - expect).abs() <= 1e-10 * expect,
                "{:?}: {} vs {expect}",
                q.family,
                rep.eta_ms_star
            );
            assert!(rep.lower_bound <= rep.eta_ms_star * (1.0 + 1e-10));
            assert!(rep.eta_ms_star <= rep.upper_bound * (1.0 + 1e-10));
        }
    }

    #[test]
    fn zo_gd_bounds_match_formulas() {
        let rep = solve_ms_critical_stepsize(&query(&[1.0], StabilityFamily::ZoGd)).unwrap();
        assert!((rep.lower_bound - 2.0 / 3.0).abs() < 1e-12);
        assert!((rep.upper_bound - 2.0).abs() < 1e-12);
        // Equal eigenvalues make the lower bound tight.
        assert!((rep.lower_bound - rep.eta_ms_star).abs() <= 1e-10 * rep.eta_ms_star);
        let rep = solve_ms_critical_stepsize(&query(&[1.0], StabilityFamily::ZoGdm { beta: 0.5 })).unwrap();
        assert!((rep.lower_bound - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_zo_adam_at_zero_momentum_reduces_to_zo_gd() {
        let rep =
            solve_ms_critical_stepsize(&query(&[1.0], StabilityFamily::FrozenZoAdam { beta1: 0.0 })).unwrap();
        assert!((rep.eta_ms_star - 2.0 / 3.0).abs() <= 1e-10);
    }

    #[test]
    fn fo_families_have_coinciding_thresholds() {
        let rep = solve_ms_critical_stepsize(&query(&[2.0, 1.0], StabilityFamily::Gdm { beta: 0.3 })).unwrap();
        assert_eq!(rep.eta_mean_star, rep.eta_ms_star);
        assert_eq!(rep.lower_bound, rep.eta_ms_star);
        assert_eq!(rep.upper_bound, rep.eta_ms_star);
    }

    #[test]
    fn classification_examples() {
        let q = query(&[1.0], StabilityFamily::ZoGd);
        assert_eq!(classify_stepsize(&q, 0.6).unwrap(), StepsizeClass::Stable);
        assert_eq!(classify_stepsize(&q, 2.0 / 3.0).unwrap(), StepsizeClass::Critical);
        assert_eq!(classify_stepsize(&q, 0.9).unwrap(), StepsizeClass::Unstable);
        assert_eq!(classify_stepsize(&q, 1.5).unwrap(), StepsizeClass::Unstable);
    }

    #[test]
    fn jury_examples_and_contract() {
        assert!(jury_local_stability(0.5, 0.0));
        assert!(!jury_local_stability(0.76, 0.5));
        for bk in 0..10 {
            let beta = bk as f64 / 10.0;
            let pole = 1.0 - beta * beta;
            for xk in 1..=120 {
                let x = xk as f64 / 100.0;
                if math::abs(x - pole) < 1e-9 {
                    // Strict inequalities are ill-posed within rounding of
                    // the pole itself.
                    continue;
                }
                let expect = x < pole;
                assert_eq!(jury_local_stability(x, beta), expect, "x={x}, beta={beta}");
            }
        }
        assert!(!jury_local_stability(0.0, 0.3));
    }

    #[test]
    fn gamma_values_and_domain() {
        assert!((gamma_local(0.5, 0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((gamma_local(0.25, 0.5).unwrap() - 6.0).abs() < 1e-15);
        assert!(gamma_local(0.8, 0.5).is_err());
        assert!(gamma_local(0.0, 0.0).is_err());
    }

    #[test]
    fn gamma_matches_three_by_three_solve() {
        // Oracle: y = (I - K)^{-1} Phi(Q) with K the local block in the
        // (w11, w12, w22) coordinates; gamma is y[0].
        for rep in 0..100u64 {
            let draw = RngStream::new(200, rep).gaussian_vector(2);
            let beta = math::abs(draw[0]) % 0.95;
            let pole = 1.0 - beta * beta;
            let x = (math::abs(draw[1]) % 0.98) * pole;
            if x <= 1e-6 {
                continue;
            }
            let b = beta;
            let k = Mat::from_rows(&[
                &[1.0 - 2.0 * x + 2.0 * x * x, 2.0 * b * (-1.0 + x), b * b],
                &[x - 2.0 * x * x, b * (1.0 - 2.0 * x), -b * b],
                &[2.0 * x * x, 2.0 * b * x, b * b],
            ]);
            let mut i_minus_k = Mat::identity(3);
            for r in 0..3 {
                for c in 0..3 {
                    i_minus_k.set(r, c, i_minus_k.get(r, c) - k.get(r, c));
                }
            }
            let y = crate::linalg::solve_linear_small(&i_minus_k, &[1.0, -1.0, 1.0]).unwrap();
            let gamma = gamma_local(x, beta).unwrap();
            assert!(
                (y[0] - gamma).abs() <= 1e-10 * gamma.max(1.0),
                "x={x} beta={beta}: solve {} vs formula {gamma}",
                y[0]
            );
        }
    }

    #[test]
    fn tracked_band_plug_ins() {
        let (lo, th, up) = tracked_band(&StabilityFamily::ZoGd, 10.0, 3.0, 0.2).unwrap();
        assert_eq!((lo, th, up), (10.0, 10.0, 16.0));
        let (lo, th, up) = tracked_band(&StabilityFamily::ZoGdm { beta: 0.9 }, 10.0, 3.0, 0.02).unwrap();
        assert!((lo - 10.0).abs() < 1e-12 && (th - 10.0).abs() < 1e-12);
        assert!((up - (10.0 + 6.0 / 1.9)).abs() < 1e-12);
        let (lo, th, up) =
            tracked_band(&StabilityFamily::FrozenZoAdam { beta1: 0.9 }, 50.0, 5.0, 0.04).unwrap();
        assert!((lo - 50.0).abs() < 1e-12 && (th - 50.0).abs() < 1e-12);
        assert!((up - (50.0 + 10.0 / 1.9)).abs() < 1e-12);
    }

    #[test]
    fn momentum_shrinks_zo_but_grows_fo_threshold() {
        for rep in 0..20u64 {
            let draws = RngStream::new(300, rep).gaussian_vector(4);
            let values: Vec<f64> = draws.iter().map(|v| 0.1 + math::abs(*v) * 2.0).collect();
            let mut last_zo = f64::INFINITY;
            let mut last_fo = 0.0f64;
            for bk in 0..10 {
                let beta = bk as f64 / 10.0;
                let zo = solve_ms_critical_stepsize(&query(&values, StabilityFamily::ZoGdm { beta }))
                    .unwrap()
                    .eta_ms_star;
                let fo = fo_critical_stepsize(&query(&values, StabilityFamily::Gdm { beta })).unwrap();
                assert!(zo < last_zo, "zo eta* not decreasing at beta={beta}");
                assert!(fo > last_fo, "fo eta* not increasing at beta={beta}");
                last_zo = zo;
                last_fo = fo;
            }
        }
    }

    #[test]
    fn bound_sandwich_and_bracket_on_random_spectra() {
        for rep in 0..200u64 {
            let stream = RngStream::new(400, rep);
            let d = 1 + (rep % 16) as usize;
            let values: Vec<f64> = stream.gaussian_vector(d).iter().map(|v| 0.05 + math::abs(*v) * 3.0).collect();
            let families = [
                StabilityFamily::ZoGd,
                StabilityFamily::ZoGdm { beta: 0.3 },
                StabilityFamily::ZoGdm { beta: 0.9 },
                StabilityFamily::FrozenZoAdam { beta1: 0.6 },
            ];
            for family in families {
                let q = query(&values, family);
                let rep = solve_ms_critical_stepsize(&q).unwrap();
                assert!(rep.lower_bound <= rep.eta_ms_star * (1.0 + 1e-10));
                assert!(rep.eta_ms_star <= rep.upper_bound * (1.0 + 1e-10));
                // Bracket validity: S(lower) <= 1 <= S(upper) (out-of-domain
                // upper bounds count as unstable).
                let s_lo = ms_condition_value(&q.spectrum, rep.lower_bound, &family).unwrap();
                assert!(s_lo <= 1.0 + 1e-12);
                match ms_condition_value(&q.spectrum, rep.upper_bound, &family) {
                    Ok(s_hi) => assert!(s_hi >= 1.0 - 1e-12),
                    Err(CoreError::OutOfDomain(_)) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn zo_mean_threshold_equals_fo_threshold() {
        for rep in 0..100u64 {
            let stream = RngStream::new(500, rep);
            let d = 1 + (rep % 8) as usize;
            let values: Vec<f64> = stream.gaussian_vector(d).iter().map(|v| 0.1 + math::abs(*v)).collect();
            let beta = (rep % 10) as f64 / 10.0;
            let pairs = [
                (StabilityFamily::ZoGd, StabilityFamily::Gd),
                (StabilityFamily::ZoGdm { beta }, StabilityFamily::Gdm { beta }),
                (StabilityFamily::FrozenZoAdam { beta1: beta }, StabilityFamily::FrozenAdam { beta1: beta }),
            ];
            for (zo, fo) in pairs {
                let zo_mean = solve_ms_critical_stepsize(&query(&values, zo)).unwrap().eta_mean_star;
                let fo_star = fo_critical_stepsize(&query(&values, fo)).unwrap();
                assert!((zo_mean - fo_star).abs() <= 1e-12 * fo_star);
            }
        }
    }
}
