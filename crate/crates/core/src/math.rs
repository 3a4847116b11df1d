//! Scalar math shims.
//!
//! Transcendentals come from `libm` in every build so that results are
//! identical with and without `std` (and across platforms, which underpins
//! the bit-reproducibility guarantees of training runs).

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// IEEE-754 power of two for small non-negative exponents.
#[inline]
pub fn pow2_u32(e: u32) -> u64 {
    1u64 << e
}
