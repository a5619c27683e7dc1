#![allow(clippy::excessive_precision)]

use std::sync::LazyLock;

use isoflow_core::ensemble::{fill_distance_block, fill_flow_block};
use isoflow_core::flow::distance::DistanceSimulator;
use isoflow_core::flow::{
    default_dt, replication_stream, scaled_paths, simulate_arratia, simulate_npoint, step_npoint,
    AdaptiveFlow, AdaptiveSettings, DistanceSettings, FlowState,
};
use isoflow_core::moments::{coalescence_probability, estimate_distance_moment};
use isoflow_core::profile::{build_profile, CorrelationModel, CorrelationProfile};
use isoflow_core::rng::{Philox4x32, StreamTag};
use isoflow_core::stats::{ks_two_sample, mean_and_error};
use isoflow_core::{ArratiaEnsemble, DistanceEnsemble, FlowEnsemble, Kernel};
use rand_distr::{Distribution, StandardNormal};

static UNIT: LazyLock<CorrelationProfile> =
    LazyLock::new(|| build_profile(&Kernel::bump(1.0).unwrap(), 2.0 / 2048.0).unwrap());

// Φ(0.1) for the unit bump, from the quadrature oracle
const PHI_01: f64 = 0.984_923_910_663_673_001;

fn normals(rng: &mut Philox4x32, out: &mut [f64]) {
    for z in out.iter_mut() {
        *z = StandardNormal.sample(rng);
    }
}

#[test]
fn single_particle_is_brownian() {
    let p = &*UNIT;
    let m = 4000;
    let finals: Vec<f64> = (0..m)
        .map(|r| {
            let mut rng = Philox4x32::stream(11, StreamTag::NPoint, r);
            simulate_npoint(p, &[0.3], 0.05, &[2.0], &mut rng, false).unwrap().positions[0] - 0.3
        })
        .collect();
    let (mean, se) = mean_and_error(&finals);
    assert!(mean.abs() < 3.0 * se);
    let var = finals.iter().map(|x| x * x).sum::<f64>() / m as f64;
    // var/t has standard error √(2/M)
    assert!((var / 2.0 - 1.0).abs() < 3.0 * (2.0 / m as f64).sqrt(), "{var}");
}

#[test]
fn one_step_covariance_matches_profile() {
    let p = &*UNIT;
    let dt = 1e-3;
    let m = 1_000_000u64;
    let mut rng = Philox4x32::stream(5, StreamTag::Auxiliary, 0);
    let mut noise = [0.0; 2];
    let (mut sxy, mut sxy2) = (0.0, 0.0);
    for _ in 0..m {
        let mut s = FlowState::new(&[0.0, 0.1]).unwrap();
        normals(&mut rng, &mut noise);
        step_npoint(p, &mut s, dt, &noise).unwrap();
        let c = (s.positions[0] - 0.0) * (s.positions[1] - 0.1);
        sxy += c;
        sxy2 += c * c;
    }
    let mean = sxy / m as f64;
    let se = ((sxy2 / m as f64 - mean * mean) / m as f64).sqrt();
    assert!((mean - PHI_01 * dt).abs() < 4.0 * se, "{mean} vs {}", PHI_01 * dt);
}

#[test]
fn separated_particles_move_independently() {
    let p = &*UNIT;
    let dt = 1e-3;
    let m = 200_000u64;
    let mut rng = Philox4x32::stream(6, StreamTag::Auxiliary, 0);
    let mut noise = [0.0; 2];
    let mut prods = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let mut s = FlowState::new(&[0.0, 10.0]).unwrap();
        normals(&mut rng, &mut noise);
        step_npoint(p, &mut s, dt, &noise).unwrap();
        prods.push(s.positions[0] * (s.positions[1] - 10.0) / dt);
    }
    let (mean, se) = mean_and_error(&prods);
    assert!(mean.abs() < 4.0 * se);
}

#[test]
fn quadratic_and_cross_variation() {
    let p = &*UNIT;
    let dt = 1e-4;
    let steps = 10_000;
    let mut qv_err = Vec::new();
    let mut cross_err = Vec::new();
    let mut noise = [0.0; 2];
    for r in 0..20 {
        let mut rng = Philox4x32::stream(8, StreamTag::Auxiliary, r);
        let mut s = FlowState::new(&[0.0, 0.5]).unwrap();
        let (mut qv, mut cross, mut phi_int) = (0.0, 0.0, 0.0);
        for _ in 0..steps {
            let before = s.positions.clone();
            phi_int += p.phi(before[1] - before[0]) * dt;
            normals(&mut rng, &mut noise);
            step_npoint(p, &mut s, dt, &noise).unwrap();
            let (dx, dy) = (s.positions[0] - before[0], s.positions[1] - before[1]);
            qv += dx * dx;
            cross += dx * dy;
        }
        qv_err.push(qv - 1.0);
        cross_err.push(cross - phi_int);
    }
    // each realized variation fluctuates by about √(2·t·dt) = 0.014
    let (qm, qs) = mean_and_error(&qv_err);
    let (cm, cs) = mean_and_error(&cross_err);
    assert!(qm.abs() < 4.0 * qs && qv_err.iter().all(|e| e.abs() < 0.07), "{qv_err:?}");
    assert!(cm.abs() < 4.0 * cs && cross_err.iter().all(|e| e.abs() < 0.07), "{cross_err:?}");
}

#[test]
fn direct_scheme_preserves_order_at_default_step() {
    let p = &*UNIT;
    let dt = default_dt(p.lprime());
    let mut violations = 0;
    for r in 0..40 {
        let mut rng = Philox4x32::stream(2, StreamTag::NPoint, r);
        let path = simulate_npoint(p, &[-0.2, 0.0, 0.05, 0.7], dt, &[1.0, 3.0], &mut rng, false).unwrap();
        violations += path.order_violations;
    }
    assert_eq!(violations, 0);
}

#[test]
fn distance_process_matches_two_point_motion() {
    let p = &*UNIT;
    let m = 10_000;
    let t = [5.0];
    let dt = 1e-3;
    let sim = DistanceSimulator::new(p, dt, DistanceSettings::default()).unwrap();
    let d = DistanceEnsemble::generate(&sim, 1.0, &t, m, 21, false, None).unwrap();
    let a: Vec<f64> = d.xi_column(0).collect();
    let b: Vec<f64> = (0..m as u64)
        .map(|r| {
            let mut rng = Philox4x32::stream(22, StreamTag::NPoint, r);
            let x = simulate_npoint(p, &[0.0, 1.0], dt, &t, &mut rng, false).unwrap().positions;
            x[1] - x[0]
        })
        .collect();
    let ks = ks_two_sample(&a, &b);
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn distance_is_a_martingale() {
    let p = &*UNIT;
    let sim = DistanceSimulator::new(p, 1e-3, DistanceSettings::default()).unwrap();
    let times = [1.0, 10.0];
    let e = DistanceEnsemble::generate(&sim, 1.0, &times, 4000, 3, true, None).unwrap();
    for t in times {
        let h1 = estimate_distance_moment(&e, 1, t).unwrap();
        assert!(h1.within_errors(1.0, 3.0), "{h1:?}");
    }
}

#[test]
fn adaptive_engine_matches_direct_scheme() {
    let p = &*UNIT;
    let pts = [0.0, 0.4, 1.1];
    let t = [2.0];
    let m = 4000;
    let mut flow = AdaptiveFlow::new(p, 3, AdaptiveSettings::with_dt(1e-3)).unwrap();
    let adaptive = FlowEnsemble::generate(&mut flow, &pts, &t, m, 31, false).unwrap();
    let direct: Vec<Vec<f64>> = (0..m as u64)
        .map(|r| {
            let mut rng = Philox4x32::stream(32, StreamTag::NPoint, r);
            simulate_npoint(p, &pts, 1e-3, &t, &mut rng, false).unwrap().positions
        })
        .collect();
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        let a: Vec<f64> = (0..m).map(|r| adaptive.row(r, 0)[j] - adaptive.row(r, 0)[i]).collect();
        let b: Vec<f64> = direct.iter().map(|x| x[j] - x[i]).collect();
        let ks = ks_two_sample(&a, &b);
        assert!(ks.p_value > 0.01, "gap {i}-{j}: {ks:?}");
    }
    let a: Vec<f64> = (0..m).map(|r| adaptive.row(r, 0)[0]).collect();
    let b: Vec<f64> = direct.iter().map(|x| x[0]).collect();
    assert!(ks_two_sample(&a, &b).p_value > 0.01);
}

#[test]
fn ensembles_do_not_depend_on_chunking() {
    let p = &*UNIT;
    let times = [0.5, 2.0];
    let sim = DistanceSimulator::new(p, 1e-3, DistanceSettings::default()).unwrap();
    let whole = DistanceEnsemble::generate(&sim, 0.7, &times, 24, 9, true, Some(1)).unwrap();
    let mut rows = vec![0.0; 24 * 2];
    let mut phi = vec![0.0; 24 * 2];
    for (first, len) in [(0, 5), (5, 11), (16, 8)] {
        fill_distance_block(
            &sim,
            0.7,
            &times,
            9,
            true,
            first,
            &mut rows[first * 2..(first + len) * 2],
            Some((&mut phi[first * 2..(first + len) * 2], 1)),
        )
        .unwrap();
    }
    assert_eq!(whole.log_xi, rows);
    assert_eq!(whole.phi_integral.unwrap(), phi);

    let pts = [0.0, 0.3, 1.0];
    let mut flow = AdaptiveFlow::new(p, 3, AdaptiveSettings::with_dt(1e-3)).unwrap();
    let whole = FlowEnsemble::generate(&mut flow, &pts, &times, 10, 4, true).unwrap();
    let again = FlowEnsemble::generate(&mut flow, &pts, &times, 10, 4, true).unwrap();
    assert_eq!(whole, again);
    let mut rows = vec![0.0; 10 * 2 * 3];
    fill_flow_block(&mut flow, &pts, &times, 4, true, 7, &mut rows[7 * 6..]).unwrap();
    fill_flow_block(&mut flow, &pts, &times, 4, true, 0, &mut rows[..7 * 6]).unwrap();
    assert_eq!(whole.positions, rows);
}

#[test]
fn antithetic_partners_mirror_the_anchor() {
    let (mut a, na) = replication_stream(1, StreamTag::Distance, 4, true);
    let (mut b, nb) = replication_stream(1, StreamTag::Distance, 5, true);
    assert!(!na && nb);
    let x: f64 = StandardNormal.sample(&mut a);
    let y: f64 = StandardNormal.sample(&mut b);
    assert_eq!(x, y);
}

#[test]
fn coalescence_probability_follows_reflection_principle() {
    let m = 100_000;
    let e = ArratiaEnsemble::generate(&[0.0, 0.5], &[1.0], 1e-3, m, 17).unwrap();
    let merged = e.coalescence_times.iter().filter(|t| **t <= 1.0).count() as f64 / m as f64;
    let target = coalescence_probability(0.5, 1.0);
    let se = (target * (1.0 - target) / m as f64).sqrt();
    assert!((merged - target).abs() < 3.0 * se, "{merged} vs {target}");

    let far = ArratiaEnsemble::generate(&[0.0, 10.0], &[1.0], 1e-3, 10_000, 18).unwrap();
    assert!(far.coalescence_times.iter().all(|t| t.is_nan()));
}

#[test]
fn arratia_single_particle_and_sticking() {
    let m = 20_000;
    let e = ArratiaEnsemble::generate(&[1.0], &[3.0], 1e-2, m, 19).unwrap();
    let x: Vec<f64> = e.positions.iter().map(|x| x - 1.0).collect();
    let var = x.iter().map(|v| v * v).sum::<f64>() / m as f64;
    assert!((var / 3.0 - 1.0).abs() < 3.0 * (2.0 / m as f64).sqrt());

    for r in 0..200 {
        let mut rng = Philox4x32::stream(20, StreamTag::Arratia, r);
        let times: Vec<f64> = (1..=40).map(|k| k as f64 * 0.05).collect();
        let path = simulate_arratia(&[0.0, 0.2], &times, 1e-3, &mut rng).unwrap();
        let tc = path.coalescence_times[0];
        for (k, t) in times.iter().enumerate() {
            let gap = path.positions[2 * k + 1] - path.positions[2 * k];
            if *t >= tc {
                assert_eq!(gap, 0.0);
            } else {
                assert!(gap > 0.0);
            }
        }
    }
}

#[test]
fn rescaled_paths_shrink_together() {
    let p = &*UNIT;
    let m = 1000;
    let mut flow = AdaptiveFlow::new(p, 2, AdaptiveSettings::with_dt(1e-3)).unwrap();
    let mut previous = f64::INFINITY;
    for horizon in [1.0, 10.0, 100.0] {
        let mut sq = Vec::with_capacity(m);
        let mut ends = Vec::with_capacity(m);
        for r in 0..m as u64 {
            let (mut rng, neg) = replication_stream(40, StreamTag::Scaled, r, true);
            let x = scaled_paths(&mut flow, &[0.0, 1.0], horizon, 50, &mut rng, neg).unwrap();
            let max = x.chunks(2).map(|row| (row[1] - row[0]).abs()).fold(0.0, f64::max);
            sq.push(max * max);
            ends.push(x[x.len() - 1]);
        }
        let (ms, _) = mean_and_error(&sq);
        assert!(ms < previous, "E max² did not shrink at T = {horizon}");
        previous = ms;
        // x̄_T(u, 1) is standard normal at every T
        let var = ends.iter().map(|v| v * v).sum::<f64>() / m as f64;
        assert!((var - 1.0).abs() < 4.0 * (2.0 / m as f64).sqrt(), "T = {horizon}: {var}");
    }
}
