//! The interparticle distance ξ = x(u) - x(v) of the two-point motion.
//!
//! ξ is a one-dimensional diffusion with coefficient σ(ξ).  It is integrated
//! in η = ln ξ, where the diffusion is `g = σ(ξ)/ξ = √(2G(ξ))` and the drift
//! is `-½g² = -G(ξ)`.  Two regions admit exact or near-exact large steps:
//!
//! - beyond the support of Φ the distance is a Brownian motion with variance
//!   2 per unit time and is advanced exactly in ξ;
//! - below the core radius G is constant to within the configured tolerance
//!   and η is a Brownian motion with drift, advanced with frozen
//!   coefficients.
//!
//! Large steps are sized so that leaving the region within the step needs a
//! `margin`-sigma excursion.  Everywhere else η takes Euler steps of `dt`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{exp, ln, powi, sqrt};
use crate::profile::CorrelationModel;

use super::{check_record_times, normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSettings {
    /// Relative deviation of G from G(0) tolerated in the frozen region.
    pub core_tolerance: f64,
    /// Sigma multiple separating a large step from the region boundary.
    pub margin: f64,
}

impl Default for DistanceSettings {
    fn default() -> Self {
        Self {
            core_tolerance: 1e-3,
            margin: 6.0,
        }
    }
}

/// ln ξ sampled at the record times.
#[derive(Debug, Clone, PartialEq)]
pub struct DistancePath {
    pub xi0: f64,
    pub times: Vec<f64>,
    pub log_xi: Vec<f64>,
}

/// Precomputed region boundaries for one profile and step size.
#[derive(Debug, Clone)]
pub struct DistanceSimulator<'a, M: ?Sized> {
    model: &'a M,
    dt: f64,
    z_max: f64,
    ln_core: f64,
    g0_sq: f64,
    margin: f64,
}

/// Optional path functional `∫₀ᵗ ξˢᵐ Φ(ξₛ) ds`, accumulated by the
/// trapezoid rule on the simulation steps.
#[derive(Debug)]
pub struct PhiIntegral<'o> {
    pub power: i32,
    pub out: &'o mut [f64],
}

impl<'a, M: CorrelationModel + ?Sized> DistanceSimulator<'a, M> {
    /// Requires `0 < dt ≤ 1e-2/L′`.
    pub fn new(model: &'a M, dt: f64, settings: DistanceSettings) -> Result<Self> {
        let lprime = model.lprime();
        if !(dt > 0.0) || (lprime > 0.0 && dt > 1e-2 / lprime * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "distance step dt = {dt} must lie in (0, 1e-2/L'] with L' = {lprime}"
            )));
        }
        let core = model.core_radius(settings.core_tolerance);
        Ok(Self {
            model,
            dt,
            z_max: model.support(),
            ln_core: if core > 0.0 { ln(core) } else { f64::NEG_INFINITY },
            g0_sq: 2.0 * model.reduced_deficit(0.0),
            margin: settings.margin,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Simulates one path from `xi0`, writing ln ξ at each record time into
    /// `log_out`.  With `negate` every Gaussian draw changes sign.  Returns
    /// the number of steps taken.
    pub fn simulate_into<R: Rng + ?Sized>(
        &self,
        xi0: f64,
        record_times: &[f64],
        rng: &mut R,
        negate: bool,
        log_out: &mut [f64],
        mut phi_integral: Option<PhiIntegral<'_>>,
    ) -> Result<u64> {
        if !(xi0 > 0.0 && xi0.is_finite()) {
            return Err(Error::InvalidArgument(format!("initial distance must be positive, got {xi0}")));
        }
        check_record_times(record_times)?;
        debug_assert_eq!(log_out.len(), record_times.len());
        let sign = if negate { -1.0 } else { 1.0 };
        let model = self.model;
        let mut eta = ln(xi0);
        let mut t = 0.0;
        let mut steps = 0u64;
        let mut integral = 0.0;
        let power = phi_integral.as_ref().map_or(0, |p| p.power);
        let functional = |eta: f64| {
            let xi = exp(eta);
            if xi >= self.z_max {
                0.0
            } else {
                powi(xi, power) * model.phi(xi)
            }
        };
        let mut f_prev = if phi_integral.is_some() { functional(eta) } else { 0.0 };

        for (k, &target) in record_times.iter().enumerate() {
            loop {
                let remaining = target - t;
                if remaining <= 1e-12 * target.max(1.0) {
                    t = t.max(target);
                    break;
                }
                let xi = exp(eta);
                let z = sign * normal(rng);
                let h;
                if xi >= self.z_max {
                    let room = (xi - self.z_max) / (self.margin * core::f64::consts::SQRT_2);
                    h = (room * room).max(self.dt).min(remaining);
                    let next = xi + sqrt(2.0 * h) * z;
                    eta = if next > 0.0 {
                        ln(next)
                    } else {
                        eta - h / (xi * xi) + sqrt(2.0 * h) * z / xi
                    };
                } else if eta < self.ln_core {
                    let g = sqrt(self.g0_sq);
                    let room = if g > 0.0 {
                        (self.ln_core - eta) / (self.margin * g)
                    } else {
                        f64::INFINITY
                    };
                    h = (room * room).max(self.dt).min(remaining);
                    eta += -0.5 * self.g0_sq * h + g * sqrt(h) * z;
                } else {
                    h = self.dt.min(remaining);
                    let gd = model.reduced_deficit(xi);
                    eta += -gd * h + sqrt(2.0 * gd * h) * z;
                }
                t += h;
                steps += 1;
                if phi_integral.is_some() {
                    let f_next = functional(eta);
                    integral += 0.5 * h * (f_prev + f_next);
                    f_prev = f_next;
                }
            }
            log_out[k] = eta;
            if let Some(p) = phi_integral.as_mut() {
                p.out[k] = integral;
            }
        }
        Ok(steps)
    }
}

/// One distance path with default region settings.
pub fn simulate_distance<M: CorrelationModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    xi0: f64,
    record_times: &[f64],
    dt: f64,
    rng: &mut R,
) -> Result<DistancePath> {
    let sim = DistanceSimulator::new(model, dt, DistanceSettings::default())?;
    let mut log_xi = alloc::vec![0.0; record_times.len()];
    sim.simulate_into(xi0, record_times, rng, false, &mut log_xi, None)?;
    Ok(DistancePath {
        xi0,
        times: record_times.to_vec(),
        log_xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::PerfectCorrelation;
    use crate::rng::{Philox4x32, StreamTag};

    #[test]
    fn degenerate_distance_is_constant() {
        let mut rng = Philox4x32::stream(1, StreamTag::Distance, 0);
        let p = simulate_distance(&PerfectCorrelation, 0.7, &[0.0, 1.0, 50.0], 1e-3, &mut rng).unwrap();
        for v in p.log_xi {
            assert!((v - ln(0.7)).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_inputs() {
        let mut rng = Philox4x32::stream(1, StreamTag::Distance, 0);
        assert!(simulate_distance(&PerfectCorrelation, 0.0, &[1.0], 1e-3, &mut rng).is_err());
        assert!(simulate_distance(&PerfectCorrelation, 1.0, &[2.0, 1.0], 1e-3, &mut rng).is_err());
        assert!(simulate_distance(&PerfectCorrelation, 1.0, &[1.0], 0.0, &mut rng).is_err());
    }
}
