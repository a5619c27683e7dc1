//! Correlation profiles Φ (kernel autocorrelation or a user covariance
//! table) and the quantities the integrators need from them.
//!
//! Internally a profile interpolates the reduced deficit
//! `G(z) = (1 - Φ(z))/z²` rather than Φ itself.  G is smooth and even with
//! `G(0) = L′/2`, so `1 - Φ = z²G`, `σ(z) = |z|·√(2G)` and `σ(z)/z = √(2G)`
//! stay accurate for arbitrarily small separations.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::math::{ceil, sqrt};
use crate::quadrature::AdaptiveQuadrature;
use crate::spline::{CubicSpline, EndCondition};

/// Minimum number of samples a kernel-derived table must have on `[0, 2ε]`.
pub const MIN_PROFILE_SAMPLES: usize = 512;

/// Number of smallest positive grid points used by the curvature fit.
pub const CURVATURE_FIT_POINTS: usize = 10;

/// Everything the flow integrators need from a covariance function.
pub trait CorrelationModel {
    /// `(1 - Φ(z))/z²`, with its limit at `z = 0`.  Even in `z`.
    fn reduced_deficit(&self, z: f64) -> f64;

    /// Φ′(z).
    fn phi_prime(&self, z: f64) -> f64;

    /// -Φ″(z).
    fn neg_phi_second(&self, z: f64) -> f64;

    /// Φ vanishes identically for `|z| ≥ support()`; may be infinite.
    fn support(&self) -> f64;

    /// Largest separation below which `G` stays within `rel_tol` of `G(0)`.
    fn core_radius(&self, rel_tol: f64) -> f64;

    /// Φ(z).
    #[inline]
    fn phi(&self, z: f64) -> f64 {
        let z = z.abs();
        if z >= self.support() {
            return 0.0;
        }
        (1.0 - z * z * self.reduced_deficit(z)).clamp(0.0, 1.0)
    }

    /// 1 - Φ(z), without cancellation.
    #[inline]
    fn deficit(&self, z: f64) -> f64 {
        let z = z.abs();
        if z >= self.support() {
            return 1.0;
        }
        (z * z * self.reduced_deficit(z)).clamp(0.0, 1.0)
    }

    /// σ(z) = √(2(1 - Φ(z))).
    #[inline]
    fn sigma(&self, z: f64) -> f64 {
        sqrt(2.0 * self.deficit(z))
    }

    /// L′ = -Φ″(0) = 2 G(0).
    fn lprime(&self) -> f64 {
        2.0 * self.reduced_deficit(0.0)
    }
}

/// Where a profile came from.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "kebab-case"))]
pub enum ProfileSource {
    Kernel { epsilon: f64 },
    UserTable,
}

/// A tabulated correlation profile with cubic interpolation.
#[derive(Debug, Clone)]
pub struct CorrelationProfile {
    grid: Vec<f64>,
    phi_values: Vec<f64>,
    deficit: CubicSpline,
    z_max: f64,
    source: ProfileSource,
    fitted_curvature: f64,
    fit_residual: f64,
}

/// Tabulates Φ of `kernel` on a uniform grid over `[0, 2ε]`.
///
/// Φ values come from direct quadrature of the autocorrelation integral;
/// the interpolated reduced deficit comes from an independent quadrature of
/// the squared difference quotient.
pub fn build_profile(kernel: &Kernel, grid_step: f64) -> Result<CorrelationProfile> {
    let z_max = 2.0 * kernel.support_radius();
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let intervals = ceil(z_max / grid_step - 1e-9) as usize;
    if intervals + 1 < MIN_PROFILE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step} gives {} samples on [0, {z_max}], need at least {MIN_PROFILE_SAMPLES}",
            intervals + 1
        )));
    }
    let step = z_max / intervals as f64;
    let quad = AdaptiveQuadrature::default();
    let mut grid = Vec::with_capacity(intervals + 1);
    let mut phi_values = Vec::with_capacity(intervals + 1);
    let mut reduced = Vec::with_capacity(intervals + 1);
    for i in 0..=intervals {
        let z = if i == intervals { z_max } else { step * i as f64 };
        grid.push(z);
        phi_values.push(if i == 0 { 1.0 } else { kernel.autocorrelation(z, &quad)? });
        reduced.push(kernel.reduced_deficit(z, &quad)?);
    }
    // G = (1-Φ)/z² joins 1/z² smoothly at the edge of the support.
    let edge_slope = -2.0 / (z_max * z_max * z_max);
    let deficit = CubicSpline::new(
        grid.clone(),
        reduced,
        EndCondition::Clamped(0.0),
        EndCondition::Clamped(edge_slope),
    );
    let (fitted_curvature, fit_residual) = fit_local_curvature(&grid, &phi_values);
    Ok(CorrelationProfile {
        grid,
        phi_values,
        deficit,
        z_max,
        source: ProfileSource::Kernel {
            epsilon: kernel.epsilon(),
        },
        fitted_curvature,
        fit_residual,
    })
}

/// Wraps a user-supplied covariance table `b(z_i)`.
///
/// Requires `abscissae[0] = 0`, strictly increasing abscissae, `values[0] = 1`
/// and all values in `[0, 1]`; the failing index is reported otherwise.  The
/// profile is taken to vanish beyond the last abscissa.
pub fn profile_from_table(abscissae: &[f64], values: &[f64]) -> Result<CorrelationProfile> {
    if abscissae.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "table has {} abscissae but {} values",
            abscissae.len(),
            values.len()
        )));
    }
    if abscissae.len() < 3 {
        return Err(Error::InvalidTable {
            index: abscissae.len(),
            reason: "table needs at least three rows",
        });
    }
    if abscissae[0] != 0.0 {
        return Err(Error::InvalidTable {
            index: 0,
            reason: "abscissae must start at 0",
        });
    }
    for i in 1..abscissae.len() {
        if !(abscissae[i] > abscissae[i - 1]) || !abscissae[i].is_finite() {
            return Err(Error::InvalidTable {
                index: i,
                reason: "abscissae must be finite and strictly increasing",
            });
        }
    }
    for (i, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidTable {
                index: i,
                reason: "values must lie in [0, 1]",
            });
        }
    }
    if (values[0] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidTable {
            index: 0,
            reason: "value at z = 0 must equal 1",
        });
    }
    let (beta, residual) = fit_local_curvature(abscissae, values);
    let mut reduced = Vec::with_capacity(values.len());
    reduced.push(beta.max(0.0));
    for i in 1..values.len() {
        let z = abscissae[i];
        reduced.push((1.0 - values[i]) / (z * z));
    }
    let deficit = CubicSpline::new(
        abscissae.to_vec(),
        reduced,
        EndCondition::Clamped(0.0),
        EndCondition::Natural,
    );
    let mut phi_values = values.to_vec();
    phi_values[0] = 1.0;
    Ok(CorrelationProfile {
        grid: abscissae.to_vec(),
        phi_values,
        deficit,
        z_max: abscissae[abscissae.len() - 1],
        source: ProfileSource::UserTable,
        fitted_curvature: beta,
        fit_residual: residual,
    })
}

/// Least-squares fit of `(1-Φ(z))/z² = β + κ z²` over the smallest positive
/// grid points.  Returns `(β, rms residual)`.
pub fn fit_local_curvature(grid: &[f64], phi: &[f64]) -> (f64, f64) {
    let count = CURVATURE_FIT_POINTS.min(grid.len().saturating_sub(1));
    if count == 0 {
        return (f64::NAN, f64::NAN);
    }
    let pts: Vec<(f64, f64)> = (1..=count)
        .map(|i| {
            let z = grid[i];
            (z * z, (1.0 - phi[i]) / (z * z))
        })
        .collect();
    if count == 1 {
        return (pts[0].1, 0.0);
    }
    let n = count as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let beta = my - slope * mx;
    let ss: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (beta + slope * p.0);
            r * r
        })
        .sum();
    (beta, sqrt(ss / n))
}

impl CorrelationProfile {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi_values
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }

    pub fn source(&self) -> ProfileSource {
        self.source
    }

    /// Grid spacing when the grid is uniform (always for kernel profiles).
    pub fn grid_step(&self) -> Option<f64> {
        let n = self.grid.len() - 1;
        let h = self.z_max / n as f64;
        self.grid
            .iter()
            .enumerate()
            .all(|(i, &z)| (z - h * i as f64).abs() <= 1e-12 * self.z_max)
            .then_some(h)
    }

    /// β from the least-squares fit near the origin, with its rms residual.
    pub fn fitted_curvature(&self) -> (f64, f64) {
        (self.fitted_curvature, self.fit_residual)
    }

    /// The curvature route to L′ on the tabulated Φ values: Richardson
    /// extrapolation of `2(1-Φ(h))/h²` at the 8th and 4th grid points.
    pub fn curvature_lprime(&self) -> Option<f64> {
        if self.grid.len() <= 8 {
            return None;
        }
        let r = |i: usize| 2.0 * (1.0 - self.phi_values[i]) / (self.grid[i] * self.grid[i]);
        let (h8, h4) = (self.grid[8], self.grid[4]);
        if ((h8 - 2.0 * h4) / h8).abs() > 1e-9 {
            return None;
        }
        Some((4.0 * r(4) - r(8)) / 3.0)
    }

    /// The interpolated Φ at every grid point (equals the table up to
    /// rounding).
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

impl CorrelationModel for CorrelationProfile {
    #[inline]
    fn reduced_deficit(&self, z: f64) -> f64 {
        let z = z.abs();
        if z >= self.z_max {
            return 1.0 / (z * z);
        }
        self.deficit.value(z).max(0.0)
    }

    #[inline]
    fn phi_prime(&self, z: f64) -> f64 {
        let a = z.abs();
        if a >= self.z_max {
            return 0.0;
        }
        let (g, dg, _) = self.deficit.eval_all(a);
        let d = -(2.0 * a * g + a * a * dg);
        if z < 0.0 {
            -d
        } else {
            d
        }
    }

    #[inline]
    fn neg_phi_second(&self, z: f64) -> f64 {
        let a = z.abs();
        if a >= self.z_max {
            return 0.0;
        }
        let (g, dg, d2g) = self.deficit.eval_all(a);
        2.0 * g + 4.0 * a * dg + a * a * d2g
    }

    fn support(&self) -> f64 {
        self.z_max
    }

    fn core_radius(&self, rel_tol: f64) -> f64 {
        let g0 = self.deficit.value(0.0);
        if g0 <= 0.0 {
            return 0.0;
        }
        // Scan a refined grid so the radius is not limited by table spacing.
        let samples = 4 * self.grid.len();
        let step = self.z_max / samples as f64;
        let mut radius = 0.0;
        for i in 1..=samples {
            let z = step * i as f64;
            if (self.reduced_deficit(z) / g0 - 1.0).abs() > rel_tol {
                break;
            }
            radius = z;
        }
        radius
    }
}

/// Φ ≡ 1: all particles share one Brownian motion and σ ≡ 0.  Not a valid
/// covariance table (it has no strict maximum); used to exercise the
/// integrators in the degenerate limit.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectCorrelation;

impl CorrelationModel for PerfectCorrelation {
    fn reduced_deficit(&self, _z: f64) -> f64 {
        0.0
    }

    fn phi_prime(&self, _z: f64) -> f64 {
        0.0
    }

    fn neg_phi_second(&self, _z: f64) -> f64 {
        0.0
    }

    fn support(&self) -> f64 {
        f64::INFINITY
    }

    fn core_radius(&self, _rel_tol: f64) -> f64 {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_profile() -> CorrelationProfile {
        let k = Kernel::bump(1.0).unwrap();
        build_profile(&k, 2.0 / 2048.0).unwrap()
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let k = Kernel::bump(1.0).unwrap();
        assert!(matches!(
            build_profile(&k, 2.0 / 100.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(build_profile(&k, 2.0 / 511.0).is_ok());
    }

    #[test]
    fn support_and_origin() {
        let p = unit_profile();
        assert_eq!(p.phi(0.0), 1.0);
        assert_eq!(p.phi(2.0), 0.0);
        assert_eq!(p.phi(-3.5), 0.0);
        assert_eq!(p.sigma(0.0), 0.0);
        assert!((p.sigma(2.0) - core::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(p.len(), 2049);
        assert_eq!(p.source(), ProfileSource::Kernel { epsilon: 1.0 });
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = unit_profile();
        for &z in &[0.05, 0.4, -0.7, 1.3, 1.9] {
            let h = 1e-5;
            let d1 = (p.phi(z + h) - p.phi(z - h)) / (2.0 * h);
            assert!((d1 - p.phi_prime(z)).abs() < 1e-7, "phi' at {z}");
            let d2 = (p.phi(z + h) - 2.0 * p.phi(z) + p.phi(z - h)) / (h * h);
            assert!((d2 + p.neg_phi_second(z)).abs() < 1e-3, "phi'' at {z}");
        }
        assert!((p.neg_phi_second(0.0) - p.lprime()).abs() < 1e-12);
    }

    #[test]
    fn table_validation_reports_index() {
        let z = [0.0, 0.5, 1.0, 1.5];
        assert_eq!(
            profile_from_table(&z, &[0.9, 0.5, 0.2, 0.0]).unwrap_err(),
            Error::InvalidTable {
                index: 0,
                reason: "value at z = 0 must equal 1"
            }
        );
        assert!(matches!(
            profile_from_table(&z, &[1.0, 0.5, 1.2, 0.0]),
            Err(Error::InvalidTable { index: 2, .. })
        ));
        assert!(matches!(
            profile_from_table(&[0.0, 0.5, 0.5, 1.0], &[1.0, 0.5, 0.2, 0.0]),
            Err(Error::InvalidTable { index: 2, .. })
        ));
        assert!(matches!(
            profile_from_table(&[0.1, 0.5, 0.7], &[1.0, 0.5, 0.2]),
            Err(Error::InvalidTable { index: 0, .. })
        ));
        assert!(matches!(
            profile_from_table(&z, &[1.0, 0.5]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn gaussian_table_curvature() {
        let n = 8001;
        let z: Vec<f64> = (0..n).map(|i| 8.0 * i as f64 / (n - 1) as f64).collect();
        let b: Vec<f64> = z.iter().map(|&x| libm::exp(-x * x)).collect();
        let p = profile_from_table(&z, &b).unwrap();
        let (beta, resid) = p.fitted_curvature();
        assert!((beta - 1.0).abs() < 1e-6, "beta {beta}");
        assert!(resid < 1e-3);
        assert!((p.phi(0.37) - libm::exp(-0.37 * 0.37)).abs() < 1e-9);
        assert_eq!(p.source(), ProfileSource::UserTable);
    }

    #[test]
    fn core_radius_is_conservative() {
        let p = unit_profile();
        let r = p.core_radius(1e-3);
        assert!(r > 0.0 && r < 0.1, "radius {r}");
        let g0 = p.reduced_deficit(0.0);
        assert!((p.reduced_deficit(r) / g0 - 1.0).abs() <= 1e-3);
    }
}
