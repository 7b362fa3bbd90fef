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

//! Error type shared across the crate.

use alloc::string::String;
use core::fmt;

/// Errors raised by numerical routines and contract checks.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Matrix failed the symmetry tolerance.
    NotSymmetric { max_asym: f64, tol: f64 },
    /// Operand shapes disagree.
    DimMismatch { expected: usize, got: usize, what: &'static str },
    /// Linear system is singular or too ill-conditioned to trust.
    IllConditioned { cond_estimate: f64 },
    /// A scalar argument sits outside the domain of the formula.
    OutOfDomain(String),
    /// A hyperparameter violates its range constraint.
    InvalidParameter(String),
    /// A non-finite value surfaced where the contract requires finiteness.
    NonFinite(String),
    /// Spectrum has no positive eigenvalue, so no stability threshold exists.
    ZeroSpectrum,
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::NotSymmetric { max_asym, tol } => write!(
                f,
                "matrix is not symmetric: max |a_ij - a_ji| = {max_asym:e} exceeds {tol:e}"
            ),
            CoreError::DimMismatch { expected, got, what } => {
                write!(f, "dimension mismatch for {what}: expected {expected}, got {got}")
            }
            CoreError::IllConditioned { cond_estimate } => write!(
                f,
                "linear system rejected: condition estimate {cond_estimate:e} exceeds 1e12"
            ),
            CoreError::OutOfDomain(msg) => write!(f, "out of domain: {msg}"),
            CoreError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            CoreError::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            CoreError::ZeroSpectrum => write!(f, "spectrum is identically zero"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
