//! Monte Carlo estimators for distance moments, Lyapunov rates, mixed
//! moments of the n-point motion and the comparison with the coalescing
//! reference.

use alloc::format;
use alloc::vec::Vec;

use crate::ensemble::{ArratiaEnsemble, DistanceEnsemble, FlowEnsemble};
use crate::error::{Error, Result};
use crate::math::{exp, ln, powi, sqrt};
use crate::profile::CorrelationModel;
use crate::stats::{ks_two_sample, KsResult, MomentEstimate};

pub use crate::stats::{fit_growth_exponent, GROWTH_BURN_IN};

/// `E ξₜᵐ`.
pub fn estimate_distance_moment(ens: &DistanceEnsemble, m: i32, t: f64) -> Result<MomentEstimate> {
    let k = ens.time_index(t)?;
    let mf = m as f64;
    Ok(MomentEstimate::from_samples(
        ens.log_xi_column(k).map(|e| exp(mf * e)),
        ens.antithetic,
        t,
        format!("E[xi^{m}]"),
    ))
}

/// `E (1/t) ln ξₜ` at time `t > 0`.
pub fn estimate_lyapunov(ens: &DistanceEnsemble, t: f64) -> Result<MomentEstimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("Lyapunov rate needs t > 0, got {t}")));
    }
    let k = ens.time_index(t)?;
    Ok(MomentEstimate::from_samples(
        ens.log_xi_column(k).map(|e| e / t),
        ens.antithetic,
        t,
        "E[ln(xi)/t]".into(),
    ))
}

/// `E (1/t) ln(1 - Φ(ξₜ))`, evaluated as `(2 ln ξ + ln G(ξ))/t` so that it
/// stays finite however small ξ gets.
pub fn estimate_log_deficit_rate<M: CorrelationModel + ?Sized>(
    ens: &DistanceEnsemble,
    model: &M,
    t: f64,
) -> Result<MomentEstimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("rate needs t > 0, got {t}")));
    }
    let k = ens.time_index(t)?;
    Ok(MomentEstimate::from_samples(
        ens.log_xi_column(k).map(|e| {
            let xi = exp(e);
            (2.0 * e + ln(model.reduced_deficit(xi))) / t
        }),
        ens.antithetic,
        t,
        "E[ln(1-Phi(xi))/t]".into(),
    ))
}

/// `E[ξₜᵐ Φ(ξₜ)]`.
pub fn estimate_phi_moment<M: CorrelationModel + ?Sized>(
    ens: &DistanceEnsemble,
    model: &M,
    m: i32,
    t: f64,
) -> Result<MomentEstimate> {
    let k = ens.time_index(t)?;
    Ok(MomentEstimate::from_samples(
        ens.log_xi_column(k).map(|e| {
            let xi = exp(e);
            powi(xi, m) * model.phi(xi)
        }),
        ens.antithetic,
        t,
        format!("E[xi^{m} Phi(xi)]"),
    ))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecursionRow {
    pub time: f64,
    /// Monte Carlo `h_{m+2}(t)`.
    pub observed: MomentEstimate,
    /// `d^{m+2} + (m+2)(m+1)∫h_m - (m+2)(m+1)∫E[ξᵐΦ(ξ)]` from the ensemble.
    pub reconstruction: MomentEstimate,
    /// Per-path difference of the two, with its own standard error.
    pub residual: MomentEstimate,
    /// `(observed - reconstruction)` over the combined standard error
    /// `√(se_obs² + se_rec²)`.
    pub combined_z: f64,
    /// `|combined_z| ≤ 3`.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecursionReport {
    pub power: i32,
    pub rows: Vec<RecursionRow>,
    pub pass: bool,
}

/// Checks the Itô identity linking `h_{m+2}` to the integrals of `h_m` and
/// `E[ξᵐΦ(ξ)]` at each of `times`.  The ensemble must carry the Φ-integral
/// of power `m`; `∫h_m` uses the trapezoid rule on the record grid.  A row
/// passes when the two sides agree within three combined standard errors.
pub fn verify_recursion(ens: &DistanceEnsemble, m: i32, times: &[f64]) -> Result<RecursionReport> {
    let phi = match (&ens.phi_integral, ens.phi_power) {
        (Some(p), Some(power)) if power == m => p,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "ensemble does not carry the Phi integral of power {m}"
            )))
        }
    };
    if m < 0 {
        return Err(Error::InvalidArgument(format!("power must be non-negative, got {m}")));
    }
    let nt = ens.times.len();
    let c = ((m + 2) * (m + 1)) as f64;
    let d = ens.xi0;
    let d_top = powi(d, m + 2);
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let k = ens.time_index(t)?;
        let mut residuals = Vec::with_capacity(ens.replications);
        let mut recon = Vec::with_capacity(ens.replications);
        for r in 0..ens.replications {
            let row = &ens.log_xi[r * nt..(r + 1) * nt];
            let mut trap = 0.0;
            let (mut s_prev, mut f_prev) = (0.0, powi(d, m));
            for (&s, &lx) in ens.times[..=k].iter().zip(&row[..=k]) {
                let f = exp(m as f64 * lx);
                trap += 0.5 * (s - s_prev) * (f + f_prev);
                s_prev = s;
                f_prev = f;
            }
            let rebuilt = d_top + c * trap - c * phi[r * nt + k];
            recon.push(rebuilt);
            residuals.push(exp((m + 2) as f64 * row[k]) - rebuilt);
        }
        let observed = crate::moments::estimate_distance_moment(ens, m + 2, t)?;
        let reconstruction = MomentEstimate::from_samples(recon, ens.antithetic, t, format!("identity for h_{}", m + 2));
        let residual = MomentEstimate::from_samples(
            residuals,
            ens.antithetic,
            t,
            format!("h_{} - identity", m + 2),
        );
        let combined = sqrt(observed.std_error * observed.std_error + reconstruction.std_error * reconstruction.std_error);
        let gap = observed.value - reconstruction.value;
        let combined_z = if combined > 0.0 {
            gap / combined
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        rows.push(RecursionRow {
            time: t,
            observed,
            reconstruction,
            residual,
            combined_z,
            pass: combined_z.abs() <= 3.0,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(RecursionReport { power: m, rows, pass })
}

fn check_indices(ens: &FlowEnsemble, indices: &[usize]) -> Result<()> {
    let n = ens.particles();
    match indices.iter().find(|&&i| i >= n) {
        Some(i) => Err(Error::InvalidArgument(format!(
            "particle index {i} out of range for {n} particles"
        ))),
        None => Ok(()),
    }
}

/// `E Πᵢ x(uᵢ, t)` over the listed particle indices (repeats allowed);
/// `centered` subtracts each starting point first.
pub fn mixed_moment(ens: &FlowEnsemble, indices: &[usize], t: f64, centered: bool) -> Result<MomentEstimate> {
    check_indices(ens, indices)?;
    let k = ens.time_index(t)?;
    let u = &ens.initial_points;
    let samples = (0..ens.replications).map(|r| {
        let row = ens.row(r, k);
        indices
            .iter()
            .map(|&i| if centered { row[i] - u[i] } else { row[i] })
            .product::<f64>()
    });
    Ok(MomentEstimate::from_samples(
        samples,
        ens.antithetic,
        t,
        format!("E[prod x{}{:?}]", if centered { "bar" } else { "" }, indices),
    ))
}

/// Upper (`u`, index 1) and lower (`v`, index 0) particles of a two-point
/// ensemble.
fn pair(ens: &FlowEnsemble) -> Result<()> {
    if ens.particles() < 2 {
        return Err(Error::InvalidArgument("need a two-particle ensemble".into()));
    }
    Ok(())
}

/// `E[x̄(u,t)g(ξₜ)] - ½E[(x̄(u,t) - x̄(v,t))g(ξₜ)]`, which vanishes for every
/// bounded measurable `g`.
pub fn conditional_identity_residual<G: Fn(f64) -> f64>(
    ens: &FlowEnsemble,
    t: f64,
    g: G,
    label: &str,
) -> Result<MomentEstimate> {
    pair(ens)?;
    let k = ens.time_index(t)?;
    let (v0, u0) = (ens.initial_points[0], ens.initial_points[1]);
    let samples = (0..ens.replications).map(|r| {
        let row = ens.row(r, k);
        let (xu, xv) = (row[1] - u0, row[0] - v0);
        let w = g(row[1] - row[0]);
        xu * w - 0.5 * (xu - xv) * w
    });
    Ok(MomentEstimate::from_samples(
        samples,
        ens.antithetic,
        t,
        format!("conditional identity residual, g = {label}"),
    ))
}

/// `E[x(u,t)Φ(ξₜ)]`.
pub fn position_phi_moment<M: CorrelationModel + ?Sized>(
    ens: &FlowEnsemble,
    model: &M,
    t: f64,
) -> Result<MomentEstimate> {
    pair(ens)?;
    let k = ens.time_index(t)?;
    let samples = (0..ens.replications).map(|r| {
        let row = ens.row(r, k);
        row[1] * model.phi(row[1] - row[0])
    });
    Ok(MomentEstimate::from_samples(samples, ens.antithetic, t, "E[x(u) Phi(xi)]".into()))
}

/// `E[x²(u,t)x(v,t)]/t`.
pub fn cross_moment_x2x(ens: &FlowEnsemble, t: f64) -> Result<MomentEstimate> {
    pair(ens)?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("cross moment needs t > 0, got {t}")));
    }
    let k = ens.time_index(t)?;
    let samples = (0..ens.replications).map(|r| {
        let row = ens.row(r, k);
        row[1] * row[1] * row[0] / t
    });
    Ok(MomentEstimate::from_samples(samples, ens.antithetic, t, "E[x(u)^2 x(v)]/t".into()))
}

/// Per replication, `max_s |x̄_T(u,s) - x̄_T(v,s)|` over the record grid of
/// an ensemble recorded on `[0, horizon]`.
pub fn scaled_separation(ens: &FlowEnsemble, horizon: f64) -> Result<Vec<f64>> {
    pair(ens)?;
    let d0 = ens.initial_points[1] - ens.initial_points[0];
    let inv = 1.0 / sqrt(horizon);
    Ok((0..ens.replications)
        .map(|r| {
            (0..ens.times.len())
                .map(|k| {
                    let row = ens.row(r, k);
                    ((row[1] - row[0] - d0) * inv).abs()
                })
                .fold(0.0, f64::max)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArratiaComparison {
    pub time: f64,
    pub threshold: f64,
    /// `P(|ξₜ| < δ)` in the smooth flow.
    pub smooth_close: MomentEstimate,
    /// `P(coalesced by t)` in the reference system.
    pub coalesced: MomentEstimate,
    /// `2(1 - Φ_N(d/√(2t)))`.
    pub oracle: f64,
    /// Two-sample KS of the upper particle's marginal.
    pub marginal_ks: KsResult,
}

/// Probability that two coalescing Brownian motions started `d` apart have
/// met by time `t`.
pub fn coalescence_probability(d: f64, t: f64) -> f64 {
    libm::erfc(d.abs() / (2.0 * sqrt(t)))
}

pub fn arratia_agreement(
    smooth: &FlowEnsemble,
    reference: &ArratiaEnsemble,
    t: f64,
    threshold: f64,
) -> Result<ArratiaComparison> {
    pair(smooth)?;
    if reference.initial_points != smooth.initial_points {
        return Err(Error::InvalidArgument("ensembles start from different points".into()));
    }
    let ks_ = smooth.time_index(t)?;
    let kr = reference.time_index(t)?;
    let n = reference.initial_points.len();
    let nt = reference.times.len();
    let close = (0..smooth.replications).map(|r| {
        let row = smooth.row(r, ks_);
        ((row[1] - row[0]).abs() < threshold) as u8 as f64
    });
    let smooth_close = MomentEstimate::from_samples(close, smooth.antithetic, t, format!("P(|xi| < {threshold})"));
    let pairs = n - 1;
    let merged = (0..reference.replications).map(|r| {
        let tc = reference.coalescence_times[r * pairs];
        (tc <= t) as u8 as f64
    });
    let coalesced = MomentEstimate::from_samples(merged, false, t, "P(coalesced)".into());
    let a: Vec<f64> = (0..smooth.replications).map(|r| smooth.row(r, ks_)[1]).collect();
    let b: Vec<f64> = (0..reference.replications)
        .map(|r| reference.positions[(r * nt + kr) * n + 1])
        .collect();
    let d = smooth.initial_points[1] - smooth.initial_points[0];
    Ok(ArratiaComparison {
        time: t,
        threshold,
        smooth_close,
        coalesced,
        oracle: coalescence_probability(d, t),
        marginal_ks: ks_two_sample(&a, &b),
    })
}
