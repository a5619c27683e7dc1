//! Coalescing Brownian motions: the Arratia reference system.
//!
//! Clusters move as independent standard Brownian motions.  Two adjacent
//! clusters merge when their order inverts at the end of a step or, failing
//! that, with the Brownian-bridge probability that the difference process
//! (variance 2 per unit time) touched zero inside the step,
//! `exp(-g₀g₁/dt)` for gaps `g₀`, `g₁` at the step ends.  A merged cluster
//! keeps the lower member's position.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{exp, sqrt};

use super::{check_record_times, normal};

#[derive(Debug, Clone, PartialEq)]
pub struct ArratiaPath {
    pub times: Vec<f64>,
    /// Positions time-major, one row of `n` per record time.
    pub positions: Vec<f64>,
    /// Merge time of each adjacent pair `(i, i+1)`, NaN if it never merged.
    pub coalescence_times: Vec<f64>,
}

/// Simulates from strictly increasing `points` to the last record time.
pub fn simulate_arratia<R: Rng + ?Sized>(
    points: &[f64],
    record_times: &[f64],
    dt: f64,
    rng: &mut R,
) -> Result<ArratiaPath> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no particles".into()));
    }
    if let Some(i) = (1..n).find(|&i| !(points[i] > points[i - 1])) {
        return Err(Error::InvalidArgument(format!(
            "initial points must be strictly increasing; point {i} breaks the order"
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    check_record_times(record_times)?;

    // Each cluster is (first particle index, position).
    let mut clusters: Vec<(usize, f64)> = points.iter().copied().enumerate().collect();
    let mut previous: Vec<f64> = points.to_vec();
    let mut coalescence_times = vec![f64::NAN; n.saturating_sub(1)];
    let mut positions = Vec::with_capacity(n * record_times.len());
    let mut t = 0.0;

    for &target in record_times {
        loop {
            let remaining = target - t;
            if remaining <= 1e-12 * target.max(1.0) {
                break;
            }
            let h = if clusters.len() == 1 { remaining } else { dt.min(remaining) };
            let s = sqrt(h);
            for (c, prev) in clusters.iter_mut().zip(previous.iter_mut()) {
                *prev = c.1;
                c.1 += s * normal(rng);
            }
            t += h;
            let mut j = 0;
            while j + 1 < clusters.len() {
                let g0 = previous[j + 1] - previous[j];
                let g1 = clusters[j + 1].1 - clusters[j].1;
                let merge = g1 <= 0.0 || rng.random::<f64>() < exp(-g0 * g1 / h);
                if merge {
                    coalescence_times[clusters[j + 1].0 - 1] = t;
                    clusters.remove(j + 1);
                    previous.remove(j + 1);
                } else {
                    j += 1;
                }
            }
        }
        let mut row = vec![0.0; n];
        for (c, w) in clusters.iter().enumerate() {
            let end = clusters.get(c + 1).map_or(n, |next| next.0);
            for slot in &mut row[w.0..end] {
                *slot = w.1;
            }
        }
        positions.extend_from_slice(&row);
    }
    Ok(ArratiaPath {
        times: record_times.to_vec(),
        positions,
        coalescence_times,
    })
}
