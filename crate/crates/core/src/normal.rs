//! Standard normal density and distribution helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

#[inline]
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `P(Z <= z)`.
#[inline]
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `P(Z > z)`, accurate in the upper tail.
#[inline]
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `P(lo < Z <= hi)` for `lo <= hi`, avoiding cancellation in either tail.
#[inline]
pub fn interval(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        sf(lo) - sf(hi)
    } else if hi < 0.0 {
        cdf(hi) - cdf(lo)
    } else {
        1.0 - sf(hi) - cdf(lo)
    }
}
