//! Standard normal density, distribution function and the probabilists'
//! Hermite polynomials.

use crate::scalar::Real;

/// Standard normal density.
pub fn normal_pdf<T: Real>(x: T) -> T {
    let two = T::lit(2.0);
    (-(x * x) / two).exp() / (two * T::PI()).sqrt()
}

/// Standard normal distribution function, accurate in both tails.
pub fn normal_cdf<T: Real>(x: T) -> T {
    let x = x.to_f64_lossy();
    T::lit(0.5 * libm::erfc(-x / std::f64::consts::SQRT_2))
}

/// Upper tail `1 - Φ(x)` without cancellation.
pub fn normal_sf<T: Real>(x: T) -> T {
    normal_cdf(-x)
}

/// Probabilists' Hermite polynomial `He_k(x)` by the three-term recurrence.
///
/// `He_{-1}` is taken to be zero so that `He_{k-1}` can be used uniformly.
pub fn hermite_he<T: Real>(k: i32, x: T) -> T {
    if k < 0 {
        return T::zero();
    }
    let mut prev = T::one();
    if k == 0 {
        return prev;
    }
    let mut cur = x;
    for m in 1..k {
        let next = x * cur - T::lit(m as f64) * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `E[X^k]` for a standard normal `X`: `(k-1)!!` for even `k`, zero otherwise.
pub fn gaussian_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(|j| j as f64).product()
}

/// `E[|X|^k]` for a standard normal `X`.
pub fn gaussian_abs_moment(k: u32) -> f64 {
    if k % 2 == 0 {
        return gaussian_moment(k);
    }
    // E|X|^{2m+1} = sqrt(2/pi) * 2^m * m!
    let m = (k - 1) / 2;
    let mut acc = (2.0 / std::f64::consts::PI).sqrt();
    for j in 1..=m {
        acc *= 2.0 * j as f64;
    }
    acc
}
