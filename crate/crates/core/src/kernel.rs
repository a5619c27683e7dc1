//! The mollifier kernel and its Lyapunov constant.

use alloc::format;

use crate::error::{Error, Result};
use crate::math::{exp, sqrt};
use crate::quadrature::AdaptiveQuadrature;

/// Number of grid intervals on `[0, 2ε]` used by default for profile
/// tabulation and for the finite-difference curvature route.
pub const DEFAULT_GRID_INTERVALS: usize = 2048;

/// The standard mollifier `φ(q) = c·exp(-1/(1-q²))` on `(-1, 1)`, scaled to
/// `φ_ε(q) = ε^{-1/2} φ(q/ε)` and normalised to unit L² norm.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Kernel {
    epsilon: f64,
    normalization_constant: f64,
}

impl Kernel {
    /// Builds the bump kernel of half-width `epsilon`.
    pub fn bump(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel scale epsilon must be positive and finite, got {epsilon}"
            )));
        }
        // c^{-2} = ∫ exp(-2/(1-q²)) dq; scaling by ε preserves the L² norm.
        let quad = AdaptiveQuadrature::new(1e-15);
        let mass = quad.integrate(|q| unit_bump(q) * unit_bump(q), -1.0, 1.0)?;
        Ok(Self {
            epsilon,
            normalization_constant: 1.0 / sqrt(mass),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// The constant `c` of the unscaled kernel.
    pub fn normalization_constant(&self) -> f64 {
        self.normalization_constant
    }

    /// φ vanishes for `|q| ≥ support_radius()`.
    pub fn support_radius(&self) -> f64 {
        self.epsilon
    }

    /// φ_ε(q).
    #[inline]
    pub fn value(&self, q: f64) -> f64 {
        self.normalization_constant * unit_bump(q / self.epsilon) / sqrt(self.epsilon)
    }

    /// φ_ε′(q), from the analytic derivative of the bump.
    #[inline]
    pub fn derivative(&self, q: f64) -> f64 {
        let s = q / self.epsilon;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let w = 1.0 - s * s;
        let scale = self.normalization_constant / (self.epsilon * sqrt(self.epsilon));
        scale * unit_bump(s) * (-2.0 * s / (w * w))
    }

    /// ∫ φ_ε² by quadrature.
    pub fn l2_norm_squared(&self, quad: &AdaptiveQuadrature) -> Result<f64> {
        quad.integrate(|q| self.value(q) * self.value(q), -self.epsilon, self.epsilon)
    }

    /// L′ = ∫ φ_ε′² by quadrature.
    pub fn derivative_norm_squared(&self, quad: &AdaptiveQuadrature) -> Result<f64> {
        quad.integrate(
            |q| {
                let d = self.derivative(q);
                d * d
            },
            -self.epsilon,
            self.epsilon,
        )
    }

    /// Φ(z) = ∫ φ_ε(z+q) φ_ε(q) dq over the overlap of the two supports.
    pub fn autocorrelation(&self, z: f64, quad: &AdaptiveQuadrature) -> Result<f64> {
        let z = z.abs();
        let r = self.epsilon;
        if z >= 2.0 * r {
            return Ok(0.0);
        }
        quad.integrate(|q| self.value(z + q) * self.value(q), -r, r - z)
    }

    /// (1 - Φ(z))/z², computed as ½∫((φ(q+z) - φ(q))/z)² dq so that no
    /// cancellation happens near z = 0.  At z = 0 this is L′/2.
    pub fn reduced_deficit(&self, z: f64, quad: &AdaptiveQuadrature) -> Result<f64> {
        let z = z.abs();
        if z == 0.0 {
            return Ok(0.5 * self.derivative_norm_squared(quad)?);
        }
        let r = self.epsilon;
        if z >= 2.0 * r {
            return Ok(1.0 / (z * z));
        }
        let half = quad.integrate(
            |q| {
                let d = (self.value(q + z) - self.value(q)) / z;
                d * d
            },
            -r - z,
            r,
        )?;
        Ok(0.5 * half)
    }
}

/// exp(-1/(1-s²)) on (-1, 1), zero elsewhere.
#[inline]
fn unit_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        exp(-1.0 / (1.0 - s * s))
    }
}

/// Curvature route to L′: central differences of Φ at the origin,
/// `2(1-Φ(h))/h²`, Richardson-extrapolated over `h` and `h/2`.
pub fn curvature_lprime<F: FnMut(f64) -> f64>(mut phi: F, h: f64) -> f64 {
    let coarse = 2.0 * (1.0 - phi(h)) / (h * h);
    let fine = 2.0 * (1.0 - phi(0.5 * h)) / (0.25 * h * h);
    (4.0 * fine - coarse) / 3.0
}

/// L′ = ‖φ_ε′‖² by quadrature, cross-checked against the curvature route
/// -Φ″(0) computed from directly integrated Φ values.
///
/// Fails with [`Error::InconsistentLyapunov`] when the two routes differ by
/// more than 1e-3 relative.
pub fn lyapunov_lprime(kernel: &Kernel) -> Result<f64> {
    let quad = AdaptiveQuadrature::default();
    let direct = kernel.derivative_norm_squared(&quad)?;
    let h = 8.0 * 2.0 * kernel.epsilon() / DEFAULT_GRID_INTERVALS as f64;
    let mut failure = None;
    let curvature = curvature_lprime(
        |z| match kernel.autocorrelation(z, &quad) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        h,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if !((direct - curvature).abs() <= 1e-3 * direct) {
        return Err(Error::InconsistentLyapunov {
            quadrature: direct,
            curvature,
        });
    }
    Ok(direct)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_positive_scale() {
        assert!(matches!(Kernel::bump(0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(Kernel::bump(-1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(Kernel::bump(f64::NAN), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn compact_support_and_symmetry() {
        let k = Kernel::bump(1.0).unwrap();
        for &q in &[1.0, -1.0, 1.5, -7.0, 1.0 + 1e-12] {
            assert_eq!(k.value(q), 0.0);
            assert_eq!(k.derivative(q), 0.0);
        }
        for i in 0..50 {
            let q = i as f64 * 0.02;
            assert_eq!(k.value(q), k.value(-q));
            assert!(k.value(q) >= 0.0);
            assert_eq!(k.derivative(q), -k.derivative(-q));
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let k = Kernel::bump(0.7).unwrap();
        for i in 1..20 {
            let q = -0.65 + i as f64 * 0.065;
            let h = 1e-6;
            let fd = (k.value(q + h) - k.value(q - h)) / (2.0 * h);
            assert!((fd - k.derivative(q)).abs() < 1e-6 * (1.0 + fd.abs()), "q={q}");
        }
    }

    #[test]
    fn scaled_kernel_stays_normalised() {
        let quad = AdaptiveQuadrature::default();
        for &eps in &[0.05, 0.5, 1.0, 3.0] {
            let k = Kernel::bump(eps).unwrap();
            assert!((k.l2_norm_squared(&quad).unwrap() - 1.0).abs() < 1e-10, "eps={eps}");
        }
    }

    #[test]
    fn reduced_deficit_agrees_with_autocorrelation() {
        let quad = AdaptiveQuadrature::default();
        let k = Kernel::bump(1.0).unwrap();
        for &z in &[0.3, 0.9, 1.7] {
            let direct = (1.0 - k.autocorrelation(z, &quad).unwrap()) / (z * z);
            assert!((direct - k.reduced_deficit(z, &quad).unwrap()).abs() < 1e-12);
        }
        assert_eq!(k.reduced_deficit(2.5, &quad).unwrap(), 1.0 / 6.25);
    }
}
