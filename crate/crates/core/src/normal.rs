//! Standard normal distribution function.

use std::f64::consts::FRAC_1_SQRT_2;

/// `Φ(x) = ½·erfc(−x/√2)`, accurate in both tails.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `1 − Φ(x)` without cancellation.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}
