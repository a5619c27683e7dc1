//! Gauss–Legendre quadrature with adaptive panel refinement.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, cos};

/// Fixed-order Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `order`-point rule by Newton iteration on the Legendre
    /// polynomial, starting from the Chebyshev-like initial guesses.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if abs(dx) < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Applies the rule on `[a, b]`.
    #[inline]
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Adaptive composite Gauss–Legendre integration.
///
/// Each panel is compared against the sum over its two halves; panels are
/// bisected until the difference falls below their share of the tolerance,
/// the larger of `abs_tol` and `rel_tol` times the initial estimate.
#[derive(Debug, Clone)]
pub struct AdaptiveQuadrature {
    rule: GaussLegendre,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
    initial_panels: usize,
}

impl Default for AdaptiveQuadrature {
    fn default() -> Self {
        Self::new(1e-12)
    }
}

impl AdaptiveQuadrature {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            rule: GaussLegendre::new(20),
            abs_tol,
            rel_tol: 1e-13,
            max_depth: 30,
            initial_panels: 4,
        }
    }

    pub fn with_max_depth(mut self, depth: u32) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "quadrature bounds must be finite, got [{a}, {b}]"
            )));
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let width = hi - lo;
        let mut total = 0.0;
        let mut stack: Vec<(f64, f64, f64, u32)> = Vec::with_capacity(64);
        let panel = width / self.initial_panels as f64;
        let mut estimate = 0.0;
        for k in (0..self.initial_panels).rev() {
            let pa = lo + panel * k as f64;
            let pb = if k + 1 == self.initial_panels { hi } else { pa + panel };
            let v = self.rule.integrate(&f, pa, pb);
            estimate += v;
            stack.push((pa, pb, v, 0));
        }
        let tol = self.abs_tol.max(self.rel_tol * abs(estimate));
        while let Some((pa, pb, whole, depth)) = stack.pop() {
            let mid = 0.5 * (pa + pb);
            let left = self.rule.integrate(&f, pa, mid);
            let right = self.rule.integrate(&f, mid, pb);
            let refined = left + right;
            let diff = abs(refined - whole);
            let share = tol * (pb - pa) / width;
            if diff <= share || diff <= 4.0 * f64::EPSILON * abs(refined) {
                total += refined;
            } else if depth >= self.max_depth {
                let change = diff / abs(refined).max(f64::MIN_POSITIVE);
                if change > 1e-9 {
                    return Err(Error::QuadratureNonConvergence { a: pa, b: pb, change });
                }
                total += refined;
            } else {
                stack.push((mid, pb, right, depth + 1));
                stack.push((pa, mid, left, depth + 1));
            }
        }
        Ok(sign * total)
    }
}
