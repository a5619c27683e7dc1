//! Monte Carlo summaries, log-log growth fits and the two-sample
//! Kolmogorov–Smirnov test.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{exp, ln, sqrt};

/// Ensemble mean of one functional with its standard error.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub replications: usize,
    pub time: f64,
    pub descriptor: String,
}

impl MomentEstimate {
    pub fn new(value: f64, std_error: f64, replications: usize, time: f64, descriptor: String) -> Self {
        Self {
            value,
            std_error,
            ci95: (value - 1.96 * std_error, value + 1.96 * std_error),
            replications,
            time,
            descriptor,
        }
    }

    /// Summarises per-replication samples.  With `antithetic`, consecutive
    /// samples form a pair and the standard error is computed over pair
    /// means, which is the correct error for correlated partners.
    pub fn from_samples<I>(samples: I, antithetic: bool, time: f64, descriptor: String) -> Self
    where
        I: IntoIterator<Item = f64>,
    {
        let mut acc = Welford::default();
        let mut count = 0usize;
        if antithetic {
            let mut pending = None;
            for s in samples {
                count += 1;
                match pending.take() {
                    None => pending = Some(s),
                    Some(first) => acc.push(0.5 * (first + s)),
                }
            }
            if let Some(last) = pending {
                acc.push(last);
            }
        } else {
            for s in samples {
                count += 1;
                acc.push(s);
            }
        }
        Self::new(acc.mean(), acc.std_error(), count, time, descriptor)
    }

    /// Divides value and error by a positive constant.
    pub fn scaled(mut self, divisor: f64) -> Self {
        self.value /= divisor;
        self.std_error /= divisor.abs();
        self.ci95 = (self.value - 1.96 * self.std_error, self.value + 1.96 * self.std_error);
        self
    }

    /// `|value - target| ≤ k·std_error`.
    pub fn within_errors(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    /// `|value - target| ≤ rel·|target|`.
    pub fn within_relative(&self, target: f64, rel: f64) -> bool {
        (self.value - target).abs() <= rel * target.abs()
    }
}

/// Running mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        sqrt(self.variance() / self.n as f64)
    }
}

/// Power-law fit `E ≈ prefactor · t^exponent`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrowthFit {
    pub times: Vec<f64>,
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    /// Some estimate was non-positive and the fit used magnitudes.
    pub sign_warning: bool,
}

/// Times below this are transient and excluded from growth fits.
pub const GROWTH_BURN_IN: f64 = 10.0;

/// Least-squares slope of `ln|E|` against `ln t` over `t ≥ burn_in`.
pub fn fit_growth_exponent(times: &[f64], estimates: &[f64], burn_in: f64) -> Result<GrowthFit> {
    if times.len() != estimates.len() {
        return Err(Error::InvalidArgument(format!(
            "{} times but {} estimates",
            times.len(),
            estimates.len()
        )));
    }
    let mut used = Vec::new();
    let mut sign_warning = false;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in times.iter().zip(estimates) {
        if t < burn_in {
            continue;
        }
        if !(e > 0.0) {
            sign_warning = true;
        }
        if e == 0.0 || !e.is_finite() || t <= 0.0 {
            continue;
        }
        used.push(t);
        xs.push(ln(t));
        ys.push(ln(e.abs()));
    }
    if xs.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "growth fit needs at least 5 usable times past burn-in {burn_in}, got {}",
            xs.len()
        )));
    }
    let (slope, intercept, r_squared) = linear_regression(&xs, &ys);
    Ok(GrowthFit {
        times: used,
        exponent: slope,
        prefactor: exp(intercept),
        r_squared,
        sign_warning,
    })
}

/// Ordinary least squares `y = slope·x + intercept`; returns
/// `(slope, intercept, r²)`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = sqrt(na * nb / (na + nb));
    KsResult {
        statistic: d,
        p_value: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    }
}

/// Complementary Kolmogorov distribution `Q(λ) = 2Σ(-1)^{k-1} e^{-2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 2.0;
    let mut prev = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * exp(a2 * kf * kf);
        sum += term;
        if term.abs() <= 1e-3 * prev || term.abs() <= 1e-12 * sum {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term.abs();
    }
    1.0
}

/// Sample mean and standard error of a slice.
pub fn mean_and_error(xs: &[f64]) -> (f64, f64) {
    let mut w = Welford::default();
    for &x in xs {
        w.push(x);
    }
    (w.mean(), w.std_error())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_is_symmetric() {
        let e = MomentEstimate::from_samples([1.0, 2.0, 3.0, 4.0], false, 1.0, "x".into());
        assert_eq!(e.value, 2.5);
        assert!((e.ci95.1 - e.value - 1.96 * e.std_error).abs() < 1e-15);
        assert_eq!(e.replications, 4);
    }

    #[test]
    fn antithetic_pairs_are_averaged_first() {
        let e = MomentEstimate::from_samples([1.0, -1.0, 2.0, -2.0], true, 1.0, "x".into());
        assert_eq!(e.value, 0.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.replications, 4);
    }

    #[test]
    fn exact_power_law_fit() {
        let t = [1.0, 10.0, 20.0, 40.0, 80.0, 160.0];
        let e: Vec<f64> = t.iter().map(|&x: &f64| 3.0 * x.powf(1.5)).collect();
        let f = fit_growth_exponent(&t, &e, GROWTH_BURN_IN).unwrap();
        assert!((f.exponent - 1.5).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-10);
        assert_eq!(f.times.len(), 5);
        assert!(!f.sign_warning);
        assert!(fit_growth_exponent(&t[..4], &e[..4], GROWTH_BURN_IN).is_err());
    }

    #[test]
    fn negative_estimates_raise_warning() {
        let t = [10.0, 20.0, 40.0, 80.0, 160.0];
        let e = [1.0, -2.0, 4.0, 8.0, 16.0];
        let f = fit_growth_exponent(&t, &e, GROWTH_BURN_IN).unwrap();
        assert!(f.sign_warning);
        assert!((f.exponent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ks_identical_and_shifted() {
        let a: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let b: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let r = ks_two_sample(&a, &b);
        assert!((r.statistic - 0.2).abs() <= 1.001e-3);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Q(1.36) ≈ 0.049 is the familiar 5% critical point
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 1e-3);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }
}
