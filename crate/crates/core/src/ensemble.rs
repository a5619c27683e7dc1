//! Replication ensembles and their chunked generation.
//!
//! Generation is split into `fill_*` functions that produce a contiguous
//! block of replications.  Every replication draws only from its own stream,
//! so filling blocks in parallel and in any order yields the same data as a
//! single sequential pass.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::distance::{DistanceSimulator, PhiIntegral};
use crate::flow::{replication_stream, simulate_arratia, AdaptiveFlow};
use crate::math::exp;
use crate::profile::CorrelationModel;
use crate::rng::StreamTag;

/// ln ξ per replication and record time, replication-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceEnsemble {
    pub xi0: f64,
    pub times: Vec<f64>,
    pub log_xi: Vec<f64>,
    /// `∫₀ᵗ ξᵐ Φ(ξ) ds` per replication and record time, if requested.
    pub phi_integral: Option<Vec<f64>>,
    pub phi_power: Option<i32>,
    pub replications: usize,
    pub antithetic: bool,
}

/// Positions per replication, record time and particle.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowEnsemble {
    pub initial_points: Vec<f64>,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub replications: usize,
    pub antithetic: bool,
}

/// Coalescing reference ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ArratiaEnsemble {
    pub initial_points: Vec<f64>,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Merge times of adjacent pairs, NaN when unmerged.
    pub coalescence_times: Vec<f64>,
    pub replications: usize,
}

pub(crate) fn time_index(times: &[f64], t: f64) -> Result<usize> {
    times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
        .ok_or_else(|| Error::InvalidArgument(format!("time {t} was not recorded")))
}

impl DistanceEnsemble {
    pub fn time_index(&self, t: f64) -> Result<usize> {
        time_index(&self.times, t)
    }

    /// ln ξ of every replication at record index `k`.
    pub fn log_xi_column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        let nt = self.times.len();
        (0..self.replications).map(move |r| self.log_xi[r * nt + k])
    }

    pub fn xi_column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.log_xi_column(k).map(exp)
    }

    /// Sequential generation; see [`fill_distance_block`].
    pub fn generate<M: CorrelationModel + ?Sized>(
        sim: &DistanceSimulator<'_, M>,
        xi0: f64,
        times: &[f64],
        replications: usize,
        base_seed: u64,
        antithetic: bool,
        phi_power: Option<i32>,
    ) -> Result<Self> {
        let nt = times.len();
        let mut log_xi = vec![0.0; replications * nt];
        let mut phi = phi_power.map(|_| vec![0.0; replications * nt]);
        fill_distance_block(
            sim,
            xi0,
            times,
            base_seed,
            antithetic,
            0,
            &mut log_xi,
            phi.as_deref_mut().zip(phi_power),
        )?;
        Ok(Self {
            xi0,
            times: times.to_vec(),
            log_xi,
            phi_integral: phi,
            phi_power,
            replications,
            antithetic,
        })
    }
}

/// Fills replications `first, first+1, …` into `log_rows` (and the matching
/// Φ-integral rows), one row of `times.len()` values each.
#[allow(clippy::too_many_arguments)]
pub fn fill_distance_block<M: CorrelationModel + ?Sized>(
    sim: &DistanceSimulator<'_, M>,
    xi0: f64,
    times: &[f64],
    base_seed: u64,
    antithetic: bool,
    first: usize,
    log_rows: &mut [f64],
    mut phi_rows: Option<(&mut [f64], i32)>,
) -> Result<u64> {
    let nt = times.len();
    let mut steps = 0;
    for (i, row) in log_rows.chunks_mut(nt).enumerate() {
        let rep = (first + i) as u64;
        let (mut rng, negate) = replication_stream(base_seed, StreamTag::Distance, rep, antithetic);
        let phi = phi_rows.as_mut().map(|(rows, power)| PhiIntegral {
            power: *power,
            out: &mut rows[i * nt..(i + 1) * nt],
        });
        steps += sim.simulate_into(xi0, times, &mut rng, negate, row, phi)?;
    }
    Ok(steps)
}

impl FlowEnsemble {
    pub fn particles(&self) -> usize {
        self.initial_points.len()
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        time_index(&self.times, t)
    }

    /// Positions of replication `rep` at record index `k`.
    pub fn row(&self, rep: usize, k: usize) -> &[f64] {
        let n = self.particles();
        let base = (rep * self.times.len() + k) * n;
        &self.positions[base..base + n]
    }

    pub fn generate<M: CorrelationModel + ?Sized>(
        flow: &mut AdaptiveFlow<'_, M>,
        points: &[f64],
        times: &[f64],
        replications: usize,
        base_seed: u64,
        antithetic: bool,
    ) -> Result<Self> {
        let mut positions = vec![0.0; replications * times.len() * points.len()];
        fill_flow_block(flow, points, times, base_seed, antithetic, 0, &mut positions)?;
        Ok(Self {
            initial_points: points.to_vec(),
            times: times.to_vec(),
            positions,
            replications,
            antithetic,
        })
    }
}

/// Fills replications `first, first+1, …` of the adaptive n-point engine.
/// Antithetic partners negate only the anchor draw.
pub fn fill_flow_block<M: CorrelationModel + ?Sized>(
    flow: &mut AdaptiveFlow<'_, M>,
    points: &[f64],
    times: &[f64],
    base_seed: u64,
    antithetic: bool,
    first: usize,
    rows: &mut [f64],
) -> Result<u64> {
    let width = times.len() * points.len();
    let mut steps = 0;
    for (i, row) in rows.chunks_mut(width).enumerate() {
        let rep = (first + i) as u64;
        let (mut rng, negate) = replication_stream(base_seed, StreamTag::NPoint, rep, antithetic);
        steps += flow.simulate_into(points, times, &mut rng, negate, row)?;
    }
    Ok(steps)
}

impl ArratiaEnsemble {
    pub fn time_index(&self, t: f64) -> Result<usize> {
        time_index(&self.times, t)
    }

    pub fn generate(points: &[f64], times: &[f64], dt: f64, replications: usize, base_seed: u64) -> Result<Self> {
        let n = points.len();
        let mut positions = vec![0.0; replications * times.len() * n];
        let mut coalescence_times = vec![0.0; replications * n.saturating_sub(1)];
        fill_arratia_block(points, times, dt, base_seed, 0, &mut positions, &mut coalescence_times)?;
        Ok(Self {
            initial_points: points.to_vec(),
            times: times.to_vec(),
            positions,
            coalescence_times,
            replications,
        })
    }
}

pub fn fill_arratia_block(
    points: &[f64],
    times: &[f64],
    dt: f64,
    base_seed: u64,
    first: usize,
    rows: &mut [f64],
    coalescence_rows: &mut [f64],
) -> Result<()> {
    let n = points.len();
    let width = times.len() * n;
    let pairs = n.saturating_sub(1);
    for (i, row) in rows.chunks_mut(width).enumerate() {
        let rep = (first + i) as u64;
        let (mut rng, _) = replication_stream(base_seed, StreamTag::Arratia, rep, false);
        let path = simulate_arratia(points, times, dt, &mut rng)?;
        row.copy_from_slice(&path.positions);
        coalescence_rows[i * pairs..(i + 1) * pairs].copy_from_slice(&path.coalescence_times);
    }
    Ok(())
}
