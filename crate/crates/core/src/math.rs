//! Float helpers routed through `libm` so the crate stays `no_std`.

#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline(always)]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline(always)]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

#[inline(always)]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline(always)]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline(always)]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

pub fn powi(x: f64, n: i32) -> f64 {
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut k = n.unsigned_abs();
    let mut acc = 1.0;
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Double factorial k!! = k(k-2)(k-4)…, with 0!! = 1.
pub fn double_factorial(k: u32) -> f64 {
    let mut acc = 1.0;
    let mut j = k;
    while j > 1 {
        acc *= j as f64;
        j -= 2;
    }
    acc
}
