use std::sync::LazyLock;

use proptest::prelude::*;
use rand::RngCore;

use isoflow_core::linalg::{psd_cholesky, SymmetricSqrt};
use isoflow_core::profile::{build_profile, CorrelationModel, CorrelationProfile};
use isoflow_core::rng::{Philox4x32, StreamTag};
use isoflow_core::spline::{CubicSpline, EndCondition};
use isoflow_core::stats::fit_growth_exponent;
use isoflow_core::{concave_majorant, double_factorial, ConcaveMajorant, Kernel, MomentEstimate};

fn profile(eps: f64) -> CorrelationProfile {
    let k = Kernel::bump(eps).unwrap();
    build_profile(&k, 2.0 * eps / 2048.0).unwrap()
}

static UNIT: LazyLock<CorrelationProfile> = LazyLock::new(|| profile(1.0));
static HALF: LazyLock<CorrelationProfile> = LazyLock::new(|| profile(0.5));
static FIFTH: LazyLock<CorrelationProfile> = LazyLock::new(|| profile(0.2));
static MAJORANT: LazyLock<ConcaveMajorant> = LazyLock::new(|| concave_majorant(&*UNIT).unwrap());

proptest! {
    #[test]
    fn phi_is_even_and_bounded(z in -3.0f64..3.0) {
        let p = &*UNIT;
        let v = p.phi(z);
        prop_assert_eq!(v, p.phi(-z));
        prop_assert!((0.0..=1.0).contains(&v));
        if z.abs() >= 2.0 {
            prop_assert_eq!(v, 0.0);
        }
        if z.abs() >= 2.0 / 2048.0 {
            prop_assert!(v < 1.0);
        }
    }

    #[test]
    fn profile_scales_with_epsilon(z in 0.0f64..1.0) {
        let unit = &*UNIT;
        prop_assert!((HALF.phi(z) - unit.phi(z / 0.5)).abs() < 1e-8);
        let w = 0.4 * z;
        prop_assert!((FIFTH.phi(w) - unit.phi(w / 0.2)).abs() < 1e-8);
    }

    #[test]
    fn majorant_dominates_deficit(z in 0.0f64..8.0) {
        let f = &*MAJORANT;
        let d = UNIT.deficit(z);
        // between samples a chord undercuts the curve by at most h²·L′/8
        prop_assert!(f.value(z) >= d - 1e-7);
        prop_assert!(f.value(z) - d <= f.gap() + 1e-9);
    }

    #[test]
    fn spline_interpolates_its_knots(ys in prop::collection::vec(-5.0f64..5.0, 4..30)) {
        let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 0.37).collect();
        let s = CubicSpline::new(xs.clone(), ys.clone(), EndCondition::Natural, EndCondition::Clamped(0.5));
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert!((s.value(*x) - y).abs() < 1e-12);
        }
        prop_assert!((s.derivative(xs[xs.len() - 1]) - 0.5).abs() < 1e-9);
        prop_assert!(s.second_derivative(0.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_root_squares_back(entries in prop::collection::vec(-1.0f64..1.0, 16)) {
        // B Bᵀ is a random 4x4 PSD matrix
        let n = 4;
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                c[i * n + j] = (0..n).map(|k| entries[i * n + k] * entries[j * n + k]).sum();
            }
        }
        let mut root = SymmetricSqrt::new(n);
        let a = root.compute(&c).unwrap().to_vec();
        let scale = c.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-3);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((a[i * n + j] - a[j * n + i]).abs() < 1e-10 * scale.sqrt().max(1.0));
                let sq: f64 = (0..n).map(|k| a[i * n + k] * a[k * n + j]).sum();
                prop_assert!((sq - c[i * n + j]).abs() < 1e-9 * scale);
            }
        }
        let mut l = vec![0.0; n * n];
        psd_cholesky(&c, n, 1e-12, &mut l);
        for i in 0..n {
            for j in 0..n {
                let llt: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                prop_assert!((llt - c[i * n + j]).abs() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn philox_streams_are_reproducible(seed in any::<u64>(), rep in 0u64..1 << 40) {
        let mut a = Philox4x32::stream(seed, StreamTag::Distance, rep);
        let mut b = Philox4x32::stream(seed, StreamTag::Distance, rep);
        let mut c = Philox4x32::stream(seed, StreamTag::Distance, rep + 1);
        let mut d = Philox4x32::stream(seed, StreamTag::NPoint, rep);
        let xa: Vec<u64> = (0..9).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..9).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..9).map(|_| c.next_u64()).collect();
        let xd: Vec<u64> = (0..9).map(|_| d.next_u64()).collect();
        prop_assert_eq!(&xa, &xb);
        prop_assert_ne!(&xa, &xc);
        prop_assert_ne!(&xa, &xd);
    }

    #[test]
    fn confidence_interval_is_centred(samples in prop::collection::vec(-10.0f64..10.0, 2..200)) {
        let e = MomentEstimate::from_samples(samples.iter().copied(), false, 1.0, "x".into());
        prop_assert!(e.std_error.is_finite() && e.std_error >= 0.0);
        prop_assert!((e.ci95.0 - (e.value - 1.96 * e.std_error)).abs() < 1e-12);
        prop_assert!((e.ci95.1 - (e.value + 1.96 * e.std_error)).abs() < 1e-12);
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert!((e.std_error - (var / n).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn growth_fit_recovers_power_law(exponent in 0.1f64..2.5, prefactor in 0.1f64..10.0) {
        let t = [10.0, 20.0, 40.0, 80.0, 160.0, 320.0];
        let e: Vec<f64> = t.iter().map(|&s: &f64| prefactor * s.powf(exponent)).collect();
        let f = fit_growth_exponent(&t, &e, 10.0).unwrap();
        prop_assert!((f.exponent - exponent).abs() < 1e-9);
        prop_assert!((f.prefactor / prefactor - 1.0).abs() < 1e-8);
        prop_assert!(f.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn double_factorial_recurrence(k in 2u32..40) {
        let r = double_factorial(k) / (k as f64 * double_factorial(k - 2));
        prop_assert!((r - 1.0).abs() < 1e-13);
    }
}

#[test]
fn majorant_is_concave_with_gap_below_one() {
    let f = &*MAJORANT;
    let v = f.vertices();
    let slopes: Vec<f64> = v.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    assert!(slopes.windows(2).all(|s| s[1] <= s[0] + 1e-12));
    assert!(f.gap() > 0.0 && f.gap() < 1.0);
    assert_eq!(f.value(f.z_cap() + 1.0), 1.0);
}

#[test]
fn local_quadratic_behaviour() {
    // σ²(z)/z² → L′ as z → 0, with error shrinking at each decade
    for eps in [1.0, 0.5] {
        let p = if eps == 1.0 { &*UNIT } else { &*HALF };
        let lp = p.lprime();
        let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|f| {
                let z = f * eps;
                (p.sigma(z).powi(2) / (z * z) - lp).abs() / lp
            })
            .collect();
        assert!(errors[0] < 1e-3, "{errors:?}");
        assert!(errors[2] <= errors[0] && errors[2] < 1e-5, "{errors:?}");
    }
}

#[test]
fn double_factorial_base_cases() {
    assert_eq!(double_factorial(0), 1.0);
    assert_eq!(double_factorial(1), 1.0);
    assert_eq!(double_factorial(3), 3.0);
    assert_eq!(double_factorial(6), 48.0);
}
