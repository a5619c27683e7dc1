//! The deterministic constants of the moment asymptotics.

use core::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::kernel::{lyapunov_lprime, Kernel};
use crate::majorant::concave_majorant;
use crate::math::sqrt;
use crate::profile::{CorrelationModel, CorrelationProfile};

/// `2/√π`, the upper even-moment constant.
pub const C_UPPER_STAR: f64 = core::f64::consts::FRAC_2_SQRT_PI;

/// Limiting γ = √(2b₀) with b₀ = 1.
pub const GAMMA_LIMIT: f64 = SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowConstants {
    /// Kernel scale; `None` for table-backed profiles.
    pub epsilon: Option<f64>,
    pub l_prime: f64,
    pub c_star: f64,
    pub c_upper_star: f64,
    pub l_inf: f64,
    pub m_inf: f64,
    pub majorant_gap: f64,
    pub beta: f64,
}

/// Constants at the limiting γ = √2.
///
/// With a kernel, L′ is the quadrature value of ‖φ′‖²; for a bare table it
/// is twice the fitted local curvature β.
pub fn moment_constants(
    profile: &CorrelationProfile,
    kernel: Option<&Kernel>,
) -> Result<FlowConstants> {
    moment_constants_with_gamma(profile, kernel, GAMMA_LIMIT)
}

pub fn moment_constants_with_gamma(
    profile: &CorrelationProfile,
    kernel: Option<&Kernel>,
    gamma: f64,
) -> Result<FlowConstants> {
    if !(gamma > 0.0 && gamma <= GAMMA_LIMIT) {
        return Err(Error::InvalidArgument(alloc::format!(
            "gamma must lie in (0, √2], got {gamma}"
        )));
    }
    let majorant = concave_majorant(profile)?;
    let gap = majorant.gap();
    let (beta, _) = profile.fitted_curvature();
    let l_prime = match kernel {
        Some(k) => lyapunov_lprime(k)?,
        None => profile.lprime(),
    };
    // b₀ = 1 and ‖b₀ - b‖ = 1 for a correlation vanishing at infinity.
    let root = sqrt(8.0 / PI);
    Ok(FlowConstants {
        epsilon: kernel.map(Kernel::epsilon),
        l_prime,
        c_star: C_UPPER_STAR * (1.0 - gap),
        c_upper_star: C_UPPER_STAR,
        l_inf: root * (sqrt(0.5) - gap / gamma),
        m_inf: root / gamma,
        majorant_gap: gap,
        beta,
    })
}
