//! Diffusively rescaled, centred paths `x̄_T(u, s) = (x(u, Ts) - u)/√T` on
//! `s ∈ [0, 1]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::profile::CorrelationModel;

use super::AdaptiveFlow;

/// Simulates one replication to horizon `horizon` and returns the rescaled
/// paths on the uniform grid `s = j/grid_points, j = 0..=grid_points`,
/// time-major.
pub fn scaled_paths<M: CorrelationModel + ?Sized, R: Rng + ?Sized>(
    flow: &mut AdaptiveFlow<'_, M>,
    points: &[f64],
    horizon: f64,
    grid_points: usize,
    rng: &mut R,
    negate_anchor: bool,
) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) || grid_points == 0 {
        return Err(Error::InvalidArgument(format!(
            "scaled paths need a positive horizon and grid, got T = {horizon}, {grid_points} points"
        )));
    }
    let n = points.len();
    let times: Vec<f64> = (0..=grid_points)
        .map(|j| horizon * j as f64 / grid_points as f64)
        .collect();
    let mut out = vec![0.0; n * times.len()];
    flow.simulate_into(points, &times, rng, negate_anchor, &mut out)?;
    let inv = 1.0 / sqrt(horizon);
    for row in out.chunks_mut(n) {
        for (x, u) in row.iter_mut().zip(points) {
            *x = (*x - u) * inv;
        }
    }
    Ok(out)
}
