//! Adaptive integration of the n-point motion over long horizons.
//!
//! The state is the centroid of the particles (the anchor) together with
//! the gaps `ξₖ = x₍ₖ₊₁₎ - xₖ`.  Gaps inside the support of Φ are carried as
//! ln ξₖ, wider gaps linearly, so order is preserved by construction.  The
//! joint covariance of the gap and anchor increments follows from the flow
//! covariance:
//!
//! ```text
//! d⟨ξₖ, ξₗ⟩ = ∫∫ -Φ″(x - y) dx dy          over [pₖ, pₖ₊₁] × [pₗ, pₗ₊₁]
//! d⟨c, ξₖ⟩  = (1/n) Σᵢ ∫ Φ′(x - pᵢ) dx     over [pₖ, pₖ₊₁]
//! d⟨c, c⟩   = (1/n²) Σᵢⱼ Φ(pᵢ - pⱼ)
//! ```
//!
//! A centroid anchor keeps the scheme invariant under reflection: for two
//! particles its noise is independent of the gap's, as in the flow itself.
//!
//! For gaps that are not thin these integrals are evaluated in closed form
//! through `D = 1 - Φ`; for thin gaps the normalised integrals are replaced
//! by three-point Gauss averages to avoid cancellation.
//!
//! When every cluster of particles (maximal run of gaps below the support)
//! is narrower than the core radius and every other gap lies beyond the
//! support, the coefficients are effectively frozen and the engine takes
//! large steps, sized like the distance simulator's.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::psd_cholesky;
use crate::math::{exp, ln, sqrt};
use crate::profile::CorrelationModel;

use super::{check_record_times, normal};

const GAUSS3_NODES: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSettings {
    /// Euler step outside the frozen regions.
    pub dt: f64,
    /// Relative deviation of G from G(0) tolerated in a frozen cluster.
    pub core_tolerance: f64,
    /// Sigma multiple separating a large step from the region boundary.
    pub margin: f64,
    /// Gaps below this fraction of the support use Gauss averages.
    pub thin_fraction: f64,
}

impl AdaptiveSettings {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            core_tolerance: 1e-3,
            margin: 6.0,
            thin_fraction: 1e-2,
        }
    }
}

/// Engine with reusable buffers for one particle count.
#[derive(Debug)]
pub struct AdaptiveFlow<'a, M: ?Sized> {
    model: &'a M,
    n: usize,
    settings: AdaptiveSettings,
    z_max: f64,
    ln_core: f64,
    g0: f64,
    thin: f64,
    eta: Vec<f64>,
    xi: Vec<f64>,
    rel: Vec<f64>,
    log_coord: Vec<bool>,
    cov: Vec<f64>,
    chol: Vec<f64>,
    noise: Vec<f64>,
}

impl<M: ?Sized> Clone for AdaptiveFlow<'_, M> {
    fn clone(&self) -> Self {
        Self {
            model: self.model,
            n: self.n,
            settings: self.settings,
            z_max: self.z_max,
            ln_core: self.ln_core,
            g0: self.g0,
            thin: self.thin,
            eta: self.eta.clone(),
            xi: self.xi.clone(),
            rel: self.rel.clone(),
            log_coord: self.log_coord.clone(),
            cov: self.cov.clone(),
            chol: self.chol.clone(),
            noise: self.noise.clone(),
        }
    }
}

impl<'a, M: CorrelationModel + ?Sized> AdaptiveFlow<'a, M> {
    pub fn new(model: &'a M, n: usize, settings: AdaptiveSettings) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("flow needs at least one particle".into()));
        }
        if !(settings.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", settings.dt)));
        }
        let core = model.core_radius(settings.core_tolerance);
        let z_max = model.support();
        Ok(Self {
            model,
            n,
            settings,
            z_max,
            ln_core: if core > 0.0 { ln(core) } else { f64::NEG_INFINITY },
            g0: sqrt(2.0 * model.reduced_deficit(0.0)),
            thin: settings.thin_fraction * z_max,
            eta: vec![0.0; n.saturating_sub(1)],
            xi: vec![0.0; n.saturating_sub(1)],
            rel: vec![0.0; n],
            log_coord: vec![false; n.saturating_sub(1)],
            cov: vec![0.0; n * n],
            chol: vec![0.0; n * n],
            noise: vec![0.0; n],
        })
    }

    pub fn particles(&self) -> usize {
        self.n
    }

    pub fn settings(&self) -> AdaptiveSettings {
        self.settings
    }

    /// Simulates one replication from strictly increasing `points`, writing
    /// positions time-major into `out` (`record_times.len() × n`).  With
    /// `negate_anchor` the Gaussian draw that only drives the anchor changes
    /// sign, which leaves the gap paths untouched.  Returns the step count.
    pub fn simulate_into<R: Rng + ?Sized>(
        &mut self,
        points: &[f64],
        record_times: &[f64],
        rng: &mut R,
        negate_anchor: bool,
        out: &mut [f64],
    ) -> Result<u64> {
        let n = self.n;
        if points.len() != n {
            return Err(Error::InvalidArgument(format!(
                "engine sized for {n} particles, got {}",
                points.len()
            )));
        }
        if let Some(i) = (1..n).find(|&i| !(points[i] > points[i - 1])) {
            return Err(Error::InvalidArgument(format!(
                "initial points must be strictly increasing; point {i} breaks the order"
            )));
        }
        check_record_times(record_times)?;
        if out.len() != n * record_times.len() {
            return Err(Error::InvalidArgument("output buffer has the wrong size".into()));
        }
        let mut anchor = points.iter().sum::<f64>() / n as f64;
        for k in 0..n - 1 {
            self.eta[k] = ln(points[k + 1] - points[k]);
        }
        let mut t = 0.0;
        let mut steps = 0u64;
        for (r, &target) in record_times.iter().enumerate() {
            loop {
                let remaining = target - t;
                if remaining <= 1e-12 * target.max(1.0) {
                    break;
                }
                for k in 0..n - 1 {
                    self.xi[k] = exp(self.eta[k]);
                }
                let h = self.large_step().max(self.settings.dt).min(remaining);
                self.build_covariance();
                psd_cholesky(&self.cov, n, 1e-12, &mut self.chol);
                for z in self.noise.iter_mut() {
                    *z = normal(rng);
                }
                if negate_anchor {
                    self.noise[n - 1] = -self.noise[n - 1];
                }
                let s = sqrt(h);
                for i in 0..n {
                    let row = &self.chol[i * n..i * n + i + 1];
                    let dw = s * row.iter().zip(&self.noise).map(|(l, z)| l * z).sum::<f64>();
                    if i == n - 1 {
                        anchor += dw;
                    } else {
                        let xi = self.xi[i];
                        if self.log_coord[i] {
                            self.eta[i] += dw - self.model.reduced_deficit(xi) * h;
                        } else {
                            let next = xi + dw;
                            self.eta[i] = if next > 0.0 {
                                ln(next)
                            } else {
                                self.eta[i] + dw / xi - self.model.reduced_deficit(xi) * h
                            };
                        }
                    }
                }
                t += h;
                steps += 1;
            }
            let row = &mut out[r * n..(r + 1) * n];
            row[0] = 0.0;
            for k in 0..n - 1 {
                row[k + 1] = row[k] + exp(self.eta[k]);
            }
            let lowest = anchor - row.iter().sum::<f64>() / n as f64;
            for x in row.iter_mut() {
                *x += lowest;
            }
        }
        Ok(steps)
    }

    /// Largest step keeping every gap in its frozen region with the margin,
    /// or 0 when some gap sits in the transition band.
    fn large_step(&self) -> f64 {
        let margin = self.settings.margin;
        let mut h = f64::INFINITY;
        let mut span = 0.0;
        let close_cluster = |span: f64, h: &mut f64| -> bool {
            if span == 0.0 {
                return true;
            }
            let ls = ln(span);
            if ls >= self.ln_core {
                return false;
            }
            if self.g0 > 0.0 {
                let room = (self.ln_core - ls) / (margin * self.g0);
                *h = h.min(room * room);
            }
            true
        };
        for &xi in &self.xi {
            if xi >= self.z_max {
                if !close_cluster(span, &mut h) {
                    return 0.0;
                }
                span = 0.0;
                let room = (xi - self.z_max) / (margin * core::f64::consts::SQRT_2);
                h = h.min(room * room);
            } else {
                span += xi;
            }
        }
        if !close_cluster(span, &mut h) {
            return 0.0;
        }
        h
    }

    /// Increment covariance in (gap coordinates…, anchor) order.
    fn build_covariance(&mut self) {
        let n = self.n;
        let m = self.model;
        let gaps = n - 1;
        self.rel[0] = 0.0;
        for k in 0..gaps {
            self.rel[k + 1] = self.rel[k] + self.xi[k];
            self.log_coord[k] = self.xi[k] < self.z_max;
        }
        let p = &self.rel;
        let d = |z: f64| m.deficit(z);
        let scale = |k: usize| if self.log_coord[k] { self.xi[k] } else { 1.0 };
        let thin = |k: usize| self.log_coord[k] && self.xi[k] < self.thin;

        for k in 0..gaps {
            let (sk, tk) = (scale(k), thin(k));
            self.cov[k * n + k] = if self.log_coord[k] {
                2.0 * m.reduced_deficit(self.xi[k])
            } else {
                2.0 * d(self.xi[k])
            };
            for l in k + 1..gaps {
                let (sl, tl) = (scale(l), thin(l));
                let v = if tk && tl {
                    let mut acc = 0.0;
                    for (a, wa) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                        let x = p[k] + a * self.xi[k];
                        for (b, wb) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                            let y = p[l] + b * self.xi[l];
                            acc += wa * wb * m.neg_phi_second(x - y);
                        }
                    }
                    acc
                } else if tk {
                    let mut acc = 0.0;
                    for (a, w) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                        let x = p[k] + a * self.xi[k];
                        acc += w * (m.phi_prime(x - p[l + 1]) - m.phi_prime(x - p[l]));
                    }
                    acc / sl
                } else if tl {
                    let mut acc = 0.0;
                    for (b, w) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                        let y = p[l] + b * self.xi[l];
                        acc += w * (m.phi_prime(y - p[k + 1]) - m.phi_prime(y - p[k]));
                    }
                    acc / sk
                } else {
                    (-d(p[k + 1] - p[l + 1]) + d(p[k + 1] - p[l]) + d(p[k] - p[l + 1]) - d(p[k] - p[l]))
                        / (sk * sl)
                };
                self.cov[k * n + l] = v;
                self.cov[l * n + k] = v;
            }
            let mut a = 0.0;
            for &pi in &p[..n] {
                a += if tk {
                    let mut acc = 0.0;
                    for (b, w) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
                        acc += w * m.phi_prime(p[k] + b * self.xi[k] - pi);
                    }
                    acc
                } else {
                    (d(p[k] - pi) - d(p[k + 1] - pi)) / sk
                };
            }
            self.cov[k * n + gaps] = a / n as f64;
            self.cov[gaps * n + k] = a / n as f64;
        }
        let mut cc = n as f64;
        for i in 0..n {
            for j in i + 1..n {
                cc += 2.0 * m.phi(p[j] - p[i]);
            }
        }
        self.cov[gaps * n + gaps] = cc / (n * n) as f64;
    }
}
