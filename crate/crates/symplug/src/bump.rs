//! Smooth compactly supported bump kernels.
//!
//! The single primitive is `s |-> exp(1 - 1/(1 - (s/a)^2))` on `|s| < a`,
//! extended by zero: value 1 at the center, all derivatives vanishing at
//! `|s| = a`, so every profile built from it is C-infinity and agrees
//! *exactly* (not approximately) with its boundary normal form outside the
//! support. Derivatives are returned analytically; nothing in the crate
//! differentiates these kernels numerically outside of test oracles.

use crate::scalar::Real;

/// Bump value at `s` for half-width `a > 0`.
#[inline]
pub fn bump<T: Real>(s: T, a: T) -> T {
    if s.abs() >= a {
        return T::zero();
    }
    let u = s / a;
    let w = T::one() - u * u;
    (T::one() - T::one() / w).exp()
}

/// Bump value together with its `d/ds` derivative.
///
/// For `w = 1 - (s/a)^2` the derivative is `-2 s / (a^2 w^2)` times the value;
/// the exponential decays fast enough that the product underflows cleanly to
/// zero near the support edge instead of producing NaN.
#[inline]
pub fn bump_d<T: Real>(s: T, a: T) -> (T, T) {
    if s.abs() >= a {
        return (T::zero(), T::zero());
    }
    let u = s / a;
    let w = T::one() - u * u;
    let v = (T::one() - T::one() / w).exp();
    let two = T::of(2.0);
    (v, v * (-(two * u) / (a * w * w)))
}
