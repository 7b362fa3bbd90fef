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

//! Zeroth-order optimization at the mean-square edge of stability.
//!
//! This crate implements the two-point gradient estimator family, the
//! optimizers built on it (ZO-GD, ZO-GDM, ZO-Adam, frozen-preconditioner
//! ZO-Adam) together with their first-order counterparts, and the
//! mean-square linear-stability calculus for all of them: critical step
//! sizes, trace/top-eigenvalue bounds, exact covariance operators with
//! their spectral radii, and training-time curvature probes.
//!
//! Everything here is pure computation over `f64` slices; IO, file
//! formats, and the experiment CLI live in the companion `zo-lab` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod covariance;
pub mod curvature;
pub mod error;
pub mod estimator;
pub mod linalg;
pub(crate) mod math;
pub mod mlp;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod stability;

pub use error::{CoreError, Result};
pub use linalg::{Spectrum, SymMatrix};
pub use rng::RngStream;
