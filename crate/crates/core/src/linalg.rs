//! Small dense symmetric matrices: cyclic Jacobi eigendecomposition,
//! positive-semidefinite square root and a rank-tolerant Cholesky factor.
//!
//! Matrices are row-major `n × n` slices.  Everything here is sized for the
//! handful of particles a flow simulation tracks.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, sqrt};

pub const MAX_JACOBI_SWEEPS: usize = 64;

/// Reusable buffers for [`SymmetricSqrt::compute`].
#[derive(Debug, Clone)]
pub struct SymmetricSqrt {
    n: usize,
    work: Vec<f64>,
    vectors: Vec<f64>,
    values: Vec<f64>,
    root: Vec<f64>,
    clipped: usize,
}

impl SymmetricSqrt {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            work: vec![0.0; n * n],
            vectors: vec![0.0; n * n],
            values: vec![0.0; n],
            root: vec![0.0; n * n],
            clipped: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Symmetric square root `A = V diag(√max(λ, 0)) Vᵀ` of `matrix`.
    pub fn compute(&mut self, matrix: &[f64]) -> Result<&[f64]> {
        let n = self.n;
        assert_eq!(matrix.len(), n * n, "matrix size does not match workspace");
        self.work.copy_from_slice(matrix);
        jacobi_eigen(&mut self.work, n, &mut self.values, &mut self.vectors)?;
        self.clipped = 0;
        for v in self.values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                self.clipped += 1;
            }
            *v = sqrt(*v);
        }
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.vectors[i * n + k] * self.values[k] * self.vectors[j * n + k];
                }
                self.root[i * n + j] = acc;
                self.root[j * n + i] = acc;
            }
        }
        Ok(&self.root)
    }

    /// Number of negative eigenvalues clipped by the last `compute`.
    pub fn clipped(&self) -> usize {
        self.clipped
    }

    /// Square roots of the (clipped) eigenvalues from the last `compute`.
    pub fn root_eigenvalues(&self) -> &[f64] {
        &self.values
    }
}

/// Eigen-decomposes the symmetric `a` in place.  On return `values` holds
/// the eigenvalues and column `k` of `vectors` the `k`-th eigenvector.
pub fn jacobi_eigen(a: &mut [f64], n: usize, values: &mut [f64], vectors: &mut [f64]) -> Result<()> {
    for i in 0..n {
        for j in 0..n {
            vectors[i * n + j] = if i == j { 1.0 } else { 0.0 };
        }
    }
    let scale: f64 = a.iter().map(|x| x * x).sum();
    let target = f64::EPSILON * f64::EPSILON * scale;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= target || off == 0.0 {
            for i in 0..n {
                values[i] = a[i * n + i];
            }
            return Ok(());
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if abs(theta) > 1e150 {
                    0.5 / theta
                } else {
                    let t = 1.0 / (abs(theta) + sqrt(theta * theta + 1.0));
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = vectors[k * n + p];
                    let vkq = vectors[k * n + q];
                    vectors[k * n + p] = c * vkp - s * vkq;
                    vectors[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::EigenNonConvergence {
        sweeps: MAX_JACOBI_SWEEPS,
    })
}

/// Lower Cholesky factor of a positive-semidefinite matrix.  Pivots that
/// fall below `rel_tol` times the original diagonal are treated as exact
/// zeros and their column is dropped.  Returns the number of dropped pivots.
pub fn psd_cholesky(a: &[f64], n: usize, rel_tol: f64, out: &mut [f64]) -> usize {
    let mut dropped = 0;
    for v in out.iter_mut() {
        *v = 0.0;
    }
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= out[j * n + k] * out[j * n + k];
        }
        if d <= rel_tol * a[j * n + j] || d <= 0.0 {
            dropped += 1;
            continue;
        }
        let root = sqrt(d);
        out[j * n + j] = root;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= out[i * n + k] * out[j * n + k];
            }
            out[i * n + j] = s / root;
        }
    }
    dropped
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c[i * n + j] += a[i * n + k] * b[k * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn sqrt_squares_back() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let mut w = SymmetricSqrt::new(3);
        let r = w.compute(&a).unwrap().to_vec();
        let back = mat_mul(&r, &r, 3);
        for (x, y) in back.iter().zip(&a) {
            assert!((x - y).abs() < 1e-13);
        }
        assert_eq!(w.clipped(), 0);
    }

    #[test]
    fn rank_deficient_and_negative_eigenvalues() {
        // all-ones has eigenvalues {2, 0}; the perturbation makes one negative
        let a = [1.0, 1.0 + 1e-14, 1.0 + 1e-14, 1.0];
        let mut w = SymmetricSqrt::new(2);
        let r = w.compute(&a).unwrap().to_vec();
        assert_eq!(w.clipped(), 1);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        for v in r {
            assert!((v - s).abs() < 1e-7);
        }
    }

    #[test]
    fn cholesky_drops_dependent_pivots() {
        let a = [1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let mut l = [0.0; 9];
        assert_eq!(psd_cholesky(&a, 3, 1e-12, &mut l), 1);
        let mut llt = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    llt[i * 3 + j] += l[i * 3 + k] * l[j * 3 + k];
                }
            }
        }
        for (x, y) in llt.iter().zip(&a) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
