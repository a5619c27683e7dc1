//! Kernel-derived constants against independently computed reference values.

#![allow(clippy::excessive_precision, clippy::approx_constant)]

use isoflow_core::kernel::DEFAULT_GRID_INTERVALS;
use isoflow_core::moments::coalescence_probability;
use isoflow_core::profile::{build_profile, CorrelationModel, CorrelationProfile};
use isoflow_core::quadrature::AdaptiveQuadrature;
use isoflow_core::{
    check_covariance_conditions, concave_majorant, lyapunov_lprime, moment_constants, Kernel,
};

// High-precision quadrature (mpmath, 30 digits) of the bump kernel.
const NORMALIZATION: f64 = 2.741_155_145_706_972_313_45;
const LPRIME: f64 = 3.077_609_131_231_777_154_44;
const PHI_AT: [(f64, f64); 4] = [
    (0.1, 0.984_923_910_663_673_001),
    (0.5, 0.711_875_143_143_354_305_47),
    (1.0, 0.254_480_090_848_245_636),
    (1.5, 0.014_901_393_522_564_473_8),
];
// Tangent construction of the concave majorant of 1 - Φ: the line through
// the origin touching the curve at Z_TANGENT, and the largest distance
// between that line and the curve.
const GAP: f64 = 0.103_291_204_887_986_277;
const GAP_LOCATION: f64 = 0.317_961_664_334_717;
const Z_TANGENT: f64 = 1.035_985_778_205;
const TANGENT_SLOPE: f64 = 0.746_177_742_697_325;
// erfc(1/4)
const REFLECTION: f64 = 0.723_673_609_831_763_1;

fn unit_profile() -> (Kernel, CorrelationProfile) {
    let k = Kernel::bump(1.0).unwrap();
    let p = build_profile(&k, 2.0 / DEFAULT_GRID_INTERVALS as f64).unwrap();
    (k, p)
}

#[test]
fn normalization_constant() {
    let k = Kernel::bump(1.0).unwrap();
    assert!((k.normalization_constant() - NORMALIZATION).abs() < 1e-12 * NORMALIZATION);
    let q = AdaptiveQuadrature::default();
    assert!((k.l2_norm_squared(&q).unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn lprime_both_routes() {
    let k = Kernel::bump(1.0).unwrap();
    let lp = lyapunov_lprime(&k).unwrap();
    assert!((lp - LPRIME).abs() < 1e-10 * LPRIME, "{lp}");
    let (_, p) = unit_profile();
    let curv = p.curvature_lprime().unwrap();
    assert!((curv - LPRIME).abs() < 1e-4 * LPRIME, "{curv}");
    let (beta, _) = p.fitted_curvature();
    assert!((beta - LPRIME / 2.0).abs() < 1e-4 * LPRIME);
}

#[test]
fn lprime_scales_inversely_with_square_of_epsilon() {
    let lp1 = lyapunov_lprime(&Kernel::bump(1.0).unwrap()).unwrap();
    let lp_half = lyapunov_lprime(&Kernel::bump(0.5).unwrap()).unwrap();
    assert!((lp_half / lp1 - 4.0).abs() < 1e-9);
}

#[test]
fn autocorrelation_values() {
    let (k, p) = unit_profile();
    let q = AdaptiveQuadrature::default();
    for (z, phi) in PHI_AT {
        assert!((k.autocorrelation(z, &q).unwrap() - phi).abs() < 1e-11, "quadrature at {z}");
        assert!((p.phi(z) - phi).abs() < 1e-9, "profile at {z}: {}", p.phi(z));
    }
    assert_eq!(p.phi(2.0), 0.0);
    assert_eq!(p.z_max(), 2.0);
}

#[test]
fn majorant_gap_and_tangent() {
    let (_, p) = unit_profile();
    let f = concave_majorant(&p).unwrap();
    assert!((f.gap() - GAP).abs() < 1e-6, "gap {}", f.gap());
    let step = p.z_max() / 8192.0;
    assert!((f.gap_location() - GAP_LOCATION).abs() < 2.0 * step);
    let v = f.vertices();
    assert_eq!(v[0], (0.0, 0.0));
    assert!((v[1].0 - Z_TANGENT).abs() < 2.0 * step, "first vertex {:?}", v[1]);
    assert!((v[1].1 / v[1].0 - TANGENT_SLOPE).abs() < 1e-6);
}

#[test]
fn flow_constants() {
    let (k, p) = unit_profile();
    let c = moment_constants(&p, Some(&k)).unwrap();
    let upper = 2.0 / std::f64::consts::PI.sqrt();
    assert!((c.c_upper_star - upper).abs() < 1e-15);
    assert!((c.c_upper_star - 1.128379).abs() < 1e-6);
    assert!((c.c_star - upper * (1.0 - GAP)).abs() < 1e-6);
    assert!((c.l_prime - LPRIME).abs() < 1e-10);
    assert!((c.beta - c.l_prime / 2.0).abs() < 1e-4 * c.l_prime);
    let root = (8.0 / std::f64::consts::PI).sqrt();
    let gamma = std::f64::consts::SQRT_2;
    assert!((c.m_inf - root / gamma).abs() < 1e-15);
    assert!((c.l_inf - root * (0.5f64.sqrt() - GAP / gamma)).abs() < 1e-6);
    assert_eq!(c.epsilon, Some(1.0));
    assert!(c.majorant_gap >= 0.0 && c.majorant_gap < 1.0);
}

#[test]
fn covariance_conditions_hold_for_bump() {
    let (_, p) = unit_profile();
    let r = check_covariance_conditions(&p);
    assert!(r.all_pass(), "{r:?}");
    assert!(r.beta_residual < 1e-6);
}

#[test]
fn reflection_principle_value() {
    let p = coalescence_probability(0.5, 1.0);
    assert!((p - REFLECTION).abs() < 1e-14);
    let phi_n = isoflow_core::normal_cdf(0.5 / 2f64.sqrt());
    assert!((p - 2.0 * (1.0 - phi_n)).abs() < 1e-12);
}
