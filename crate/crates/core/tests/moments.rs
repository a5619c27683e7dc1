use std::sync::LazyLock;

use isoflow_core::flow::distance::DistanceSimulator;
use isoflow_core::flow::{simulate_npoint, AdaptiveFlow, AdaptiveSettings, DistanceSettings};
use isoflow_core::moments::{
    arratia_agreement, conditional_identity_residual, cross_moment_x2x, estimate_distance_moment,
    estimate_lyapunov, estimate_phi_moment, mixed_moment, verify_recursion,
};
use isoflow_core::profile::{build_profile, CorrelationModel, CorrelationProfile};
use isoflow_core::rng::{Philox4x32, StreamTag};
use isoflow_core::{ArratiaEnsemble, DistanceEnsemble, FlowEnsemble, Kernel};

static UNIT: LazyLock<CorrelationProfile> = LazyLock::new(|| profile(1.0));

fn profile(eps: f64) -> CorrelationProfile {
    build_profile(&Kernel::bump(eps).unwrap(), 2.0 * eps / 2048.0).unwrap()
}

fn distance(p: &CorrelationProfile, d: f64, times: &[f64], m: usize, seed: u64) -> DistanceEnsemble {
    let dt = 1e-2 / p.lprime();
    let sim = DistanceSimulator::new(p, dt.min(1e-3), DistanceSettings::default()).unwrap();
    DistanceEnsemble::generate(&sim, d, times, m, seed, true, Some(1)).unwrap()
}

/// Two-particle ensemble from the direct scheme; allows coincident points.
fn direct_pair(points: [f64; 2], t: f64, m: usize, seed: u64) -> FlowEnsemble {
    let mut positions = Vec::with_capacity(2 * m);
    for r in 0..m as u64 {
        let mut rng = Philox4x32::stream(seed, StreamTag::NPoint, r);
        let path = simulate_npoint(&*UNIT, &points, 0.01, &[t], &mut rng, false).unwrap();
        positions.extend_from_slice(&path.positions);
    }
    FlowEnsemble {
        initial_points: points.to_vec(),
        times: vec![t],
        positions,
        replications: m,
        antithetic: false,
    }
}

#[test]
fn recursion_is_exact_at_time_zero() {
    let e = distance(&UNIT, 0.8, &[0.0, 0.5, 1.0], 64, 1);
    let r = verify_recursion(&e, 1, &[0.0]).unwrap();
    assert_eq!(r.rows[0].residual.value, 0.0);
    assert!(r.pass);
    assert!((r.rows[0].observed.value - 0.8f64.powi(3)).abs() < 1e-12);
}

#[test]
fn recursion_holds_along_the_grid() {
    let times: Vec<f64> = (1..=40).map(|k| k as f64 * 0.25).collect();
    let e = distance(&UNIT, 1.0, &times, 2000, 2);
    let r = verify_recursion(&e, 1, &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(verify_recursion(&e, 3, &[2.0]).is_err());
}

#[test]
fn phi_weighted_moment_decays() {
    let times = [1.0, 5.0, 20.0, 60.0];
    let e = distance(&UNIT, 1.0, &times, 4000, 3);
    let v: Vec<f64> = times
        .iter()
        .map(|&t| estimate_phi_moment(&e, &*UNIT, 1, t).unwrap().value)
        .collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
}

#[test]
fn lyapunov_rate_scales_with_epsilon() {
    let half = profile(0.5);
    let a = estimate_lyapunov(&distance(&UNIT, 1.0, &[50.0], 1000, 4), 50.0).unwrap();
    let b = estimate_lyapunov(&distance(&half, 1.0, &[50.0], 1000, 5), 50.0).unwrap();
    // finite-time transients differ between the two scales
    assert!((b.value / a.value / 4.0 - 1.0).abs() < 0.15, "{} {}", a.value, b.value);
}

#[test]
fn standard_error_shrinks_like_inverse_root() {
    let small = distance(&UNIT, 1.0, &[5.0], 2000, 6);
    let large = distance(&UNIT, 1.0, &[5.0], 8000, 7);
    let a = estimate_distance_moment(&small, 2, 5.0).unwrap();
    let b = estimate_distance_moment(&large, 2, 5.0).unwrap();
    assert!((b.std_error / a.std_error - 0.5).abs() < 0.1, "{} {}", a.std_error, b.std_error);
}

#[test]
fn single_point_mean_is_its_start() {
    let e = direct_pair([0.4, 1.4], 3.0, 3000, 8);
    for i in 0..2 {
        let m = mixed_moment(&e, &[i], 3.0, false).unwrap();
        assert!(m.within_errors(e.initial_points[i], 3.0), "{m:?}");
    }
}

#[test]
fn coincident_points_reduce_to_one_brownian_motion() {
    let t = 2.0;
    let zero = direct_pair([0.0, 0.0], t, 20_000, 9);
    let x = cross_moment_x2x(&zero, t).unwrap();
    assert!(x.within_errors(0.0, 3.0), "{x:?}");
    // E(1 + W_t)³ = 1 + 3t
    let one = direct_pair([1.0, 1.0], t, 20_000, 10);
    let x = cross_moment_x2x(&one, t).unwrap();
    assert!(x.within_errors((1.0 + 3.0 * t) / t, 3.0), "{x:?}");
}

#[test]
fn conditional_identity_for_several_test_functions() {
    let p = &*UNIT;
    let mut flow = AdaptiveFlow::new(p, 2, AdaptiveSettings::with_dt(1e-3)).unwrap();
    let times = [1.0, 4.0, 10.0];
    let e = FlowEnsemble::generate(&mut flow, &[0.0, 1.0], &times, 6000, 11, true).unwrap();
    for t in times {
        #[allow(clippy::type_complexity)]
        let gs: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
            ("one", Box::new(|_| 1.0)),
            ("phi", Box::new(|x| p.phi(x))),
            ("indicator", Box::new(|x| (x > 1.0) as u8 as f64)),
        ];
        for (label, g) in gs {
            let r = conditional_identity_residual(&e, t, g, label).unwrap();
            assert!(r.within_errors(0.0, 3.0), "t = {t}, {label}: {r:?}");
        }
    }
}

#[test]
fn distant_points_never_look_coalesced() {
    let p = &*UNIT;
    let mut flow = AdaptiveFlow::new(p, 2, AdaptiveSettings::with_dt(1e-3)).unwrap();
    let smooth = FlowEnsemble::generate(&mut flow, &[0.0, 10.0], &[1.0], 2000, 12, false).unwrap();
    let reference = ArratiaEnsemble::generate(&[0.0, 10.0], &[1.0], 1e-3, 2000, 13).unwrap();
    let c = arratia_agreement(&smooth, &reference, 1.0, 0.02).unwrap();
    assert_eq!(c.smooth_close.value, 0.0);
    assert_eq!(c.coalesced.value, 0.0);
    assert!(c.oracle < 1e-11);
    assert!(c.marginal_ks.p_value > 0.01);
}
