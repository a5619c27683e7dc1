//! Numerical core for one-dimensional isotropic Brownian stochastic flows
//! driven by a compactly supported convolution kernel.
//!
//! The crate is `no_std` (it needs `alloc`) and carries everything that is
//! pure computation:
//!
//! - [`kernel`] and [`profile`]: the mollifier kernel, its autocorrelation
//!   profile and the derived diffusion coefficient.
//! - [`majorant`], [`constants`] and [`diagnostics`]: the minimal concave
//!   majorant of the profile deficit and the deterministic moment constants.
//! - [`flow`]: n-point, two-point distance and coalescing reference
//!   integrators, all driven by per-replication counter-based streams.
//! - [`moments`] and [`stats`]: Monte Carlo estimators and the statistical
//!   checks used to verify the asymptotic moment laws.
//!
//! IO, configuration, parallel execution and the command line live in the
//! companion `isoflow-harness` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod constants;
pub mod diagnostics;
pub mod ensemble;
mod error;
pub mod flow;
pub mod kernel;
pub mod linalg;
pub mod majorant;
pub(crate) mod math;
pub mod moments;
pub mod profile;
pub mod quadrature;
pub mod rng;
pub mod spline;
pub mod stats;

pub use constants::{moment_constants, moment_constants_with_gamma, FlowConstants};
pub use diagnostics::{check_covariance_conditions, CovarianceReport};
pub use ensemble::{ArratiaEnsemble, DistanceEnsemble, FlowEnsemble};
pub use error::{Error, Result};
pub use kernel::{lyapunov_lprime, Kernel};
pub use majorant::{concave_majorant, ConcaveMajorant};
pub use profile::{
    build_profile, profile_from_table, CorrelationModel, CorrelationProfile, PerfectCorrelation, ProfileSource,
};
pub use math::{double_factorial, normal_cdf};
pub use stats::{GrowthFit, MomentEstimate};
