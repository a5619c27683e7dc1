//! Integrators for the flow: the direct n-point Euler–Maruyama step, the
//! log-coordinate distance process, an adaptive n-point engine for long
//! horizons, the coalescing reference system and rescaled paths.

pub mod adaptive;
pub mod arratia;
pub mod distance;
pub mod scaled;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::SymmetricSqrt;
use crate::math::sqrt;
use crate::profile::CorrelationModel;
use crate::rng::{Philox4x32, StreamTag};

pub use adaptive::{AdaptiveFlow, AdaptiveSettings};
pub use arratia::{simulate_arratia, ArratiaPath};
pub use distance::{simulate_distance, DistancePath, DistanceSettings, DistanceSimulator};
pub use scaled::scaled_paths;

/// Default Euler step `1e-3·min(1, 1/L′)`.
pub fn default_dt(lprime: f64) -> f64 {
    if lprime > 1.0 {
        1e-3 / lprime
    } else {
        1e-3
    }
}

/// The random stream of replication `rep`.  Antithetic partners share the
/// stream of their pair; the second member is flagged for negation.
pub fn replication_stream(base_seed: u64, tag: StreamTag, rep: u64, antithetic: bool) -> (Philox4x32, bool) {
    if antithetic {
        (Philox4x32::stream(base_seed, tag, rep / 2), rep % 2 == 1)
    } else {
        (Philox4x32::stream(base_seed, tag, rep), false)
    }
}

#[inline]
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Record times must be finite, non-negative and non-decreasing.
pub(crate) fn check_record_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("no record times given".into()));
    }
    for (i, &t) in times.iter().enumerate() {
        if !(t >= 0.0 && t.is_finite()) || (i > 0 && t < times[i - 1]) {
            return Err(Error::InvalidArgument(format!(
                "record time {t} at position {i} is negative, non-finite or out of order"
            )));
        }
    }
    Ok(())
}

/// Positions of an n-point motion at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub positions: Vec<f64>,
    pub time: f64,
    pub initial_points: Vec<f64>,
    /// Steps after which the particles had to be re-sorted.
    pub order_violations: u64,
}

impl FlowState {
    /// Starts the motion at `points`, which must be non-decreasing.
    pub fn new(points: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("flow needs at least one particle".into()));
        }
        if let Some(i) = (1..points.len()).find(|&i| !(points[i] >= points[i - 1])) {
            return Err(Error::InvalidArgument(format!(
                "initial points must be sorted; point {i} breaks the order"
            )));
        }
        Ok(Self {
            positions: points.to_vec(),
            time: 0.0,
            initial_points: points.to_vec(),
            order_violations: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Workspace for repeated [`NPointStepper::step`] calls.
#[derive(Debug, Clone)]
pub struct NPointStepper {
    n: usize,
    cov: Vec<f64>,
    root: SymmetricSqrt,
}

impl NPointStepper {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cov: vec![0.0; n * n],
            root: SymmetricSqrt::new(n),
        }
    }

    /// One Euler–Maruyama step `x ← x + √dt·A·noise` with `A² = [Φ(xᵢ - xⱼ)]`.
    pub fn step<M: CorrelationModel + ?Sized>(
        &mut self,
        model: &M,
        state: &mut FlowState,
        dt: f64,
        noise: &[f64],
    ) -> Result<()> {
        let n = self.n;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if state.len() != n || noise.len() != n {
            return Err(Error::InvalidArgument(format!(
                "stepper sized for {n} particles, got state {} and noise {}",
                state.len(),
                noise.len()
            )));
        }
        let x = &mut state.positions;
        for i in 0..n {
            self.cov[i * n + i] = 1.0;
            for j in i + 1..n {
                let c = model.phi(x[i] - x[j]);
                self.cov[i * n + j] = c;
                self.cov[j * n + i] = c;
            }
        }
        let a = self.root.compute(&self.cov)?;
        let s = sqrt(dt);
        let mut incr = [0.0f64; 16];
        let mut heap;
        let incr: &mut [f64] = if n <= 16 {
            &mut incr[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for i in 0..n {
            incr[i] = s * (0..n).map(|j| a[i * n + j] * noise[j]).sum::<f64>();
        }
        for i in 0..n {
            x[i] += incr[i];
        }
        if x.windows(2).any(|w| w[1] < w[0]) {
            x.sort_unstable_by(f64::total_cmp);
            state.order_violations += 1;
        }
        state.time += dt;
        Ok(())
    }
}

/// Single-step convenience wrapper around [`NPointStepper`].
pub fn step_npoint<M: CorrelationModel + ?Sized>(
    model: &M,
    state: &mut FlowState,
    dt: f64,
    noise: &[f64],
) -> Result<()> {
    NPointStepper::new(state.len()).step(model, state, dt, noise)
}

/// Positions recorded by [`simulate_npoint`], time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NPointPath {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub order_violations: u64,
}

/// Runs the direct scheme with a fixed step to each record time.  With
/// `negate` every Gaussian draw changes sign.
pub fn simulate_npoint<M: CorrelationModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    points: &[f64],
    dt: f64,
    record_times: &[f64],
    rng: &mut R,
    negate: bool,
) -> Result<NPointPath> {
    check_record_times(record_times)?;
    let mut state = FlowState::new(points)?;
    let n = state.len();
    let mut stepper = NPointStepper::new(n);
    let mut noise = vec![0.0; n];
    let mut positions = Vec::with_capacity(n * record_times.len());
    let sign = if negate { -1.0 } else { 1.0 };
    for &target in record_times {
        loop {
            let remaining = target - state.time;
            if remaining <= 1e-12 * target.max(1.0) {
                break;
            }
            let h = if remaining < dt * (1.0 + 1e-9) { remaining } else { dt };
            for z in noise.iter_mut() {
                *z = sign * normal(rng);
            }
            stepper.step(model, &mut state, h, &noise)?;
        }
        positions.extend_from_slice(&state.positions);
    }
    Ok(NPointPath {
        times: record_times.to_vec(),
        positions,
        order_violations: state.order_violations,
    })
}
