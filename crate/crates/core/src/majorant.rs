//! Minimal concave majorant of `1 - Φ` on the half-line.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::profile::CorrelationModel;

/// Default number of sample intervals on `[0, z_max]`.
pub const DEFAULT_MAJORANT_SAMPLES: usize = 1 << 13;

/// Ratio `z_cap / z_max` of the hull domain.
pub const CAP_FACTOR: f64 = 4.0;

/// The piecewise-linear envelope F and its sup-distance to `1 - Φ`.
#[derive(Debug, Clone)]
pub struct ConcaveMajorant {
    vertices: Vec<(f64, f64)>,
    gap: f64,
    gap_location: f64,
    z_cap: f64,
}

impl ConcaveMajorant {
    /// Hull vertices in increasing `z`, starting at `(0, 0)`.
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// `sup |F - (1 - Φ)|`.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Where the gap is attained.
    pub fn gap_location(&self) -> f64 {
        self.gap_location
    }

    pub fn z_cap(&self) -> f64 {
        self.z_cap
    }

    /// F(z) for `z ≥ 0`; F is 1 beyond the cap.
    pub fn value(&self, z: f64) -> f64 {
        let z = z.abs();
        let v = &self.vertices;
        if z >= v[v.len() - 1].0 {
            return v[v.len() - 1].1;
        }
        let j = v.partition_point(|p| p.0 <= z).max(1);
        let (x0, y0) = v[j - 1];
        let (x1, y1) = v[j];
        y0 + (y1 - y0) * (z - x0) / (x1 - x0)
    }
}

/// Upper hull of points sorted by abscissa (Andrew's monotone chain).
pub fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len().min(256));
    for &p in points {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Computes F on `[0, 4·z_max]` from [`DEFAULT_MAJORANT_SAMPLES`] samples.
pub fn concave_majorant<M: CorrelationModel + ?Sized>(model: &M) -> Result<ConcaveMajorant> {
    concave_majorant_with_samples(model, DEFAULT_MAJORANT_SAMPLES)
}

pub fn concave_majorant_with_samples<M: CorrelationModel + ?Sized>(
    model: &M,
    samples: usize,
) -> Result<ConcaveMajorant> {
    let z_max = model.support();
    if !z_max.is_finite() || samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "majorant needs a finite support and at least two samples (support {z_max}, samples {samples})"
        )));
    }
    let z_cap = CAP_FACTOR * z_max;
    let step = z_max / samples as f64;
    let mut points: Vec<(f64, f64)> = (0..=samples)
        .map(|i| {
            let z = if i == samples { z_max } else { step * i as f64 };
            (z, model.deficit(z))
        })
        .collect();
    points.push((z_cap, 1.0));
    let vertices = upper_hull(&points);
    let mut hull = ConcaveMajorant {
        vertices,
        gap: 0.0,
        gap_location: 0.0,
        z_cap,
    };
    for &(z, d) in &points[..points.len() - 1] {
        let g = hull.value(z) - d;
        if g > hull.gap {
            hull.gap = g;
            hull.gap_location = z;
        }
    }
    if hull.gap >= 1.0 {
        return Err(Error::MajorantGap { gap: hull.gap });
    }
    Ok(hull)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::profile_from_table;

    #[test]
    fn hull_of_concave_points_is_identity() {
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let x = i as f64 * 0.1;
                (x, x * (2.0 - x))
            })
            .collect();
        assert_eq!(upper_hull(&pts).len(), pts.len());
    }

    #[test]
    fn hull_drops_interior_points() {
        let pts = [(0.0, 0.0), (1.0, 0.2), (2.0, 1.0), (3.0, 1.0)];
        assert_eq!(upper_hull(&pts), [(0.0, 0.0), (2.0, 1.0), (3.0, 1.0)]);
    }

    #[test]
    fn concave_deficit_has_zero_gap() {
        // 1 - b(z) = z(2 - z) is concave.  It has no finite curvature at 0,
        // so interpolation is only accurate to about the first table step.
        let z: Vec<f64> = (0..=4000).map(|i| i as f64 / 4000.0).collect();
        let b: Vec<f64> = z.iter().map(|&x| 1.0 - x * (2.0 - x)).collect();
        let p = profile_from_table(&z, &b).unwrap();
        let f = concave_majorant(&p).unwrap();
        assert!(f.gap() < 5e-4, "gap {}", f.gap());
        assert_eq!(f.value(0.0), 0.0);
        assert_eq!(f.value(10.0), 1.0);
    }
}
