//! Cubic interpolating splines on strictly increasing abscissae.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::floor;

/// Boundary condition at one end of the spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndCondition {
    /// Prescribed first derivative.
    Clamped(f64),
    /// Zero second derivative.
    Natural,
}

/// A C² cubic spline.  Lookup is O(1) when the abscissae are uniform and
/// falls back to bisection otherwise.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
    uniform_step: Option<f64>,
}

impl CubicSpline {
    /// Caller guarantees `x` strictly increasing with at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>, left: EndCondition, right: EndCondition) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n, "spline needs matching abscissae/ordinates");
        // Tridiagonal system for the second derivatives, solved by the
        // Thomas algorithm.
        let mut u = vec![0.0; n];
        let mut m = vec![0.0; n];
        match left {
            EndCondition::Natural => {
                m[0] = 0.0;
                u[0] = 0.0;
            }
            EndCondition::Clamped(d) => {
                let h = x[1] - x[0];
                m[0] = -0.5;
                u[0] = (3.0 / h) * ((y[1] - y[0]) / h - d);
            }
        }
        for i in 1..n - 1 {
            let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
            let p = sig * m[i - 1] + 2.0;
            m[i] = (sig - 1.0) / p;
            let slope_r = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
            let slope_l = (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            u[i] = (6.0 * (slope_r - slope_l) / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
        }
        let (qn, un) = match right {
            EndCondition::Natural => (0.0, 0.0),
            EndCondition::Clamped(d) => {
                let h = x[n - 1] - x[n - 2];
                (0.5, (3.0 / h) * (d - (y[n - 1] - y[n - 2]) / h))
            }
        };
        m[n - 1] = (un - qn * u[n - 2]) / (qn * m[n - 2] + 1.0);
        for k in (0..n - 1).rev() {
            m[k] = m[k] * m[k + 1] + u[k];
        }

        let h0 = (x[n - 1] - x[0]) / (n - 1) as f64;
        let uniform = x
            .iter()
            .enumerate()
            .all(|(i, &xi)| (xi - (x[0] + h0 * i as f64)).abs() <= 1e-12 * h0.max(1.0));
        Self {
            x,
            y,
            m,
            uniform_step: uniform.then_some(h0),
        }
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.x
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.y
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    #[inline]
    fn locate(&self, z: f64) -> usize {
        let last = self.x.len() - 2;
        if let Some(h) = self.uniform_step {
            let k = floor((z - self.x[0]) / h);
            if k <= 0.0 {
                0
            } else {
                (k as usize).min(last)
            }
        } else {
            // partition_point gives the first abscissa strictly above z
            let idx = self.x.partition_point(|&xi| xi <= z);
            idx.saturating_sub(1).min(last)
        }
    }

    #[inline]
    fn coefficients(&self, z: f64) -> (usize, f64, f64, f64) {
        let i = self.locate(z);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - z) / h;
        (i, h, a, 1.0 - a)
    }

    /// Spline value; extrapolates the end cubic outside the knot range.
    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        let (i, h, a, b) = self.coefficients(z);
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        let (i, h, a, b) = self.coefficients(z);
        (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * self.m[i]
            + (3.0 * b * b - 1.0) / 6.0 * h * self.m[i + 1]
    }

    #[inline]
    pub fn second_derivative(&self, z: f64) -> f64 {
        let (i, _, a, b) = self.coefficients(z);
        a * self.m[i] + b * self.m[i + 1]
    }

    /// Value with first and second derivative in one lookup.
    #[inline]
    pub fn eval_all(&self, z: f64) -> (f64, f64, f64) {
        let (i, h, a, b) = self.coefficients(z);
        let (yi, yj, mi, mj) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let v = a * yi + b * yj + ((a * a * a - a) * mi + (b * b * b - b) * mj) * h * h / 6.0;
        let d = (yj - yi) / h - (3.0 * a * a - 1.0) / 6.0 * h * mi + (3.0 * b * b - 1.0) / 6.0 * h * mj;
        (v, d, a * mi + b * mj)
    }
}
