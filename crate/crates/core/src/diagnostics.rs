//! Checks of the structural conditions on a covariance b: strict maximum at
//! the origin, positive local curvature, fast decay, and the Feller
//! non-coalescence criterion.

use crate::profile::CorrelationProfile;

/// Highest power in the decay check `zⁿ b(z) → 0`.
pub const DECAY_POWER: i32 = 8;

/// Diagnostic outcome; failures are reported here, never raised.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CovarianceReport {
    /// b(z) < 1 at every grid point with z > 0.
    pub strict_maximum: bool,
    /// First grid index with b = 1 away from the origin, if any.
    pub maximum_violation: Option<usize>,
    pub beta: f64,
    pub beta_residual: f64,
    pub positive_curvature: bool,
    /// `max_n |z_maxⁿ b(z_max)|` over `n ≤ 8` at the last grid point.
    pub tail_moment: f64,
    pub decays: bool,
    /// ∫₀ z/(1-b) dz diverges, decided from the fitted β.
    pub non_coalescing: bool,
}

impl CovarianceReport {
    pub fn all_pass(&self) -> bool {
        self.strict_maximum && self.positive_curvature && self.decays && self.non_coalescing
    }
}

pub fn check_covariance_conditions(profile: &CorrelationProfile) -> CovarianceReport {
    let grid = profile.grid();
    let values = profile.phi_values();
    let maximum_violation = (1..grid.len()).find(|&i| values[i] >= 1.0);
    let (beta, beta_residual) = profile.fitted_curvature();
    let positive_curvature = beta.is_finite() && beta > 0.0;

    let z_end = grid[grid.len() - 1];
    let b_end = values[values.len() - 1];
    let tail_moment = (0..=DECAY_POWER)
        .map(|n| (crate::math::powi(z_end, n) * b_end).abs())
        .fold(0.0, f64::max);
    // Within the tail tolerance the table is indistinguishable from a
    // compactly supported one.
    let decays = tail_moment <= 1e-6;

    CovarianceReport {
        strict_maximum: maximum_violation.is_none(),
        maximum_violation,
        beta,
        beta_residual,
        positive_curvature,
        tail_moment,
        decays,
        non_coalescing: positive_curvature,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use crate::profile::profile_from_table;

    #[test]
    fn second_maximum_is_flagged() {
        let z = [0.0, 0.5, 1.0, 1.5, 2.0];
        let b = [1.0, 0.4, 1.0, 0.1, 0.0];
        let r = check_covariance_conditions(&profile_from_table(&z, &b).unwrap());
        assert!(!r.strict_maximum);
        assert_eq!(r.maximum_violation, Some(2));
        assert!(!r.all_pass());
    }

    #[test]
    fn slow_tail_fails_decay() {
        let z: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
        let b: Vec<f64> = z.iter().map(|&x| 1.0 / (1.0 + x * x)).collect();
        let r = check_covariance_conditions(&profile_from_table(&z, &b).unwrap());
        assert!(!r.decays);
        assert!(r.positive_curvature);
    }
}
