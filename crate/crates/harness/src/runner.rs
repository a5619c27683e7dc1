//! Parallel ensemble generation.
//!
//! Replications are cut into fixed chunks filled on the rayon pool.  Every
//! replication owns its random stream, so the output does not depend on the
//! worker count or scheduling.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use isoflow_core::ensemble::{fill_arratia_block, fill_distance_block, fill_flow_block};
use isoflow_core::flow::{replication_stream, scaled_paths, AdaptiveFlow, AdaptiveSettings, DistanceSimulator};
use isoflow_core::rng::StreamTag;
use isoflow_core::{ArratiaEnsemble, CorrelationModel, DistanceEnsemble, FlowEnsemble};

use crate::error::{HarnessError, Result};

/// Replications per work item.
pub const CHUNK: usize = 32;

/// Replication-count heartbeat on stderr, at most once per second.
#[derive(Debug)]
pub struct Progress {
    label: String,
    total: usize,
    done: AtomicUsize,
    last: Mutex<Instant>,
    enabled: bool,
}

impl Progress {
    pub fn new(label: impl Into<String>, total: usize, enabled: bool) -> Self {
        Self {
            label: label.into(),
            total,
            done: AtomicUsize::new(0),
            last: Mutex::new(Instant::now()),
            enabled,
        }
    }

    pub fn silent() -> Self {
        Self::new("", 0, false)
    }

    pub fn advance(&self, n: usize) {
        let done = self.done.fetch_add(n, Ordering::Relaxed) + n;
        if !self.enabled {
            return;
        }
        let Ok(mut last) = self.last.try_lock() else {
            return;
        };
        if last.elapsed() >= Duration::from_secs(1) {
            *last = Instant::now();
            eprintln!("isoflow: {}: {done}/{} replications", self.label, self.total);
        }
    }
}

/// Builds a rayon pool with `workers` threads, or one per core.
pub fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(HarnessError::Invalid("--workers must be at least 1".into()));
        }
        b = b.num_threads(w);
    }
    b.build()
        .map_err(|e| HarnessError::Invalid(format!("cannot start worker pool: {e}")))
}

#[allow(clippy::too_many_arguments)]
pub fn distance_ensemble<M: CorrelationModel + Sync + ?Sized>(
    sim: &DistanceSimulator<'_, M>,
    xi0: f64,
    times: &[f64],
    replications: usize,
    base_seed: u64,
    antithetic: bool,
    phi_power: Option<i32>,
    progress: &Progress,
) -> Result<DistanceEnsemble> {
    let nt = times.len();
    let mut log_xi = vec![0.0; replications * nt];
    match phi_power {
        Some(power) => {
            let mut phi = vec![0.0; replications * nt];
            log_xi
                .par_chunks_mut(CHUNK * nt)
                .zip(phi.par_chunks_mut(CHUNK * nt))
                .enumerate()
                .try_for_each(|(c, (rows, phi_rows))| {
                    fill_distance_block(sim, xi0, times, base_seed, antithetic, c * CHUNK, rows, Some((phi_rows, power)))?;
                    progress.advance(rows.len() / nt);
                    Ok::<_, isoflow_core::Error>(())
                })?;
            Ok(DistanceEnsemble {
                xi0,
                times: times.to_vec(),
                log_xi,
                phi_integral: Some(phi),
                phi_power,
                replications,
                antithetic,
            })
        }
        None => {
            log_xi
                .par_chunks_mut(CHUNK * nt)
                .enumerate()
                .try_for_each(|(c, rows)| {
                    fill_distance_block(sim, xi0, times, base_seed, antithetic, c * CHUNK, rows, None)?;
                    progress.advance(rows.len() / nt);
                    Ok::<_, isoflow_core::Error>(())
                })?;
            Ok(DistanceEnsemble {
                xi0,
                times: times.to_vec(),
                log_xi,
                phi_integral: None,
                phi_power: None,
                replications,
                antithetic,
            })
        }
    }
}

/// n-point ensemble from sorted, distinct `points`.
#[allow(clippy::too_many_arguments)]
pub fn flow_ensemble<M: CorrelationModel + Sync + ?Sized>(
    model: &M,
    settings: AdaptiveSettings,
    points: &[f64],
    times: &[f64],
    replications: usize,
    base_seed: u64,
    antithetic: bool,
    progress: &Progress,
) -> Result<FlowEnsemble> {
    let proto = AdaptiveFlow::new(model, points.len(), settings)?;
    let width = times.len() * points.len();
    let mut positions = vec![0.0; replications * width];
    positions
        .par_chunks_mut(CHUNK * width)
        .enumerate()
        .try_for_each_init(
            || proto.clone(),
            |flow, (c, rows)| {
                fill_flow_block(flow, points, times, base_seed, antithetic, c * CHUNK, rows)?;
                progress.advance(rows.len() / width);
                Ok::<_, isoflow_core::Error>(())
            },
        )?;
    Ok(FlowEnsemble {
        initial_points: points.to_vec(),
        times: times.to_vec(),
        positions,
        replications,
        antithetic,
    })
}

pub fn arratia_ensemble(
    points: &[f64],
    times: &[f64],
    dt: f64,
    replications: usize,
    base_seed: u64,
    progress: &Progress,
) -> Result<ArratiaEnsemble> {
    let n = points.len();
    if n < 2 {
        return Err(HarnessError::Invalid("coalescing reference needs two or more particles".into()));
    }
    let width = times.len() * n;
    let pairs = n - 1;
    let mut positions = vec![0.0; replications * width];
    let mut coalescence_times = vec![0.0; replications * pairs];
    positions
        .par_chunks_mut(CHUNK * width)
        .zip(coalescence_times.par_chunks_mut(CHUNK * pairs))
        .enumerate()
        .try_for_each(|(c, (rows, merged))| {
            fill_arratia_block(points, times, dt, base_seed, c * CHUNK, rows, merged)?;
            progress.advance(rows.len() / width);
            Ok::<_, isoflow_core::Error>(())
        })?;
    Ok(ArratiaEnsemble {
        initial_points: points.to_vec(),
        times: times.to_vec(),
        positions,
        coalescence_times,
        replications,
    })
}

/// Per replication, `max_s |x̄_T(u,s) - x̄_T(v,s)|²` on a grid of
/// `grid_points` steps over `[0, 1]`, for the pair `points = [v, u]`.
#[allow(clippy::too_many_arguments)]
pub fn scaled_max_squares<M: CorrelationModel + Sync + ?Sized>(
    model: &M,
    settings: AdaptiveSettings,
    points: [f64; 2],
    horizon: f64,
    grid_points: usize,
    replications: usize,
    base_seed: u64,
    antithetic: bool,
    progress: &Progress,
) -> Result<Vec<f64>> {
    let proto = AdaptiveFlow::new(model, 2, settings)?;
    let mut out = vec![0.0; replications];
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .try_for_each_init(
            || proto.clone(),
            |flow, (c, chunk)| {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let rep = (c * CHUNK + i) as u64;
                    let (mut rng, negate) = replication_stream(base_seed, StreamTag::Scaled, rep, antithetic);
                    let path = scaled_paths(flow, &points, horizon, grid_points, &mut rng, negate)?;
                    let max = path.chunks(2).map(|r| (r[1] - r[0]).abs()).fold(0.0, f64::max);
                    *slot = max * max;
                }
                progress.advance(chunk.len());
                Ok::<_, isoflow_core::Error>(())
            },
        )?;
    Ok(out)
}
