//! Points of the plug domain P = [-1, 1] x [-eps, eps] x T^3 and the angle
//! arithmetic used throughout.
//!
//! Coordinate order is fixed everywhere in this crate as
//! `(theta1, theta2, theta3, x, t)`; tangent vectors, covectors and form
//! matrices all index their slots in that order.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Reduces an angle into `[0, 2*pi)`.
#[inline]
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let tau = T::tau();
    let mut r = theta % tau;
    if r < T::zero() {
        r = r + tau;
    }
    // `-1e-20 % tau` rounds to tau itself; fold that back to 0.
    if r >= tau {
        r = r - tau;
    }
    r
}

/// Signed angle difference reduced into `(-pi, pi]`.
#[inline]
pub fn wrap_angle_signed<T: Real>(theta: T) -> T {
    let tau = T::tau();
    let pi = T::of(core::f64::consts::PI);
    let mut r = theta % tau;
    if r > pi {
        r = r - tau;
    } else if r <= -pi {
        r = r + tau;
    }
    r
}

/// Distance between two angles on the circle, in `[0, pi]`.
#[inline]
pub fn angle_distance<T: Real>(a: T, b: T) -> T {
    wrap_angle_signed(a - b).abs()
}

/// A point of the plug domain. Angles are stored reduced mod `2*pi`; `x` and
/// `t` are plain reals whose bounds (`|x| <= eps`, `|t| <= 1`) are enforced by
/// the operations that consume the point, since the slab half-width comes from
/// the parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlugPoint<T> {
    pub theta1: T,
    pub theta2: T,
    pub theta3: T,
    pub x: T,
    pub t: T,
}

impl<T: Real> PlugPoint<T> {
    pub fn new(theta1: T, theta2: T, theta3: T, x: T, t: T) -> Self {
        Self {
            theta1: wrap_angle(theta1),
            theta2: wrap_angle(theta2),
            theta3: wrap_angle(theta3),
            x,
            t,
        }
    }

    /// Point from a raw coordinate array in the crate's fixed order.
    pub fn from_array(c: [T; 5]) -> Self {
        Self::new(c[0], c[1], c[2], c[3], c[4])
    }

    pub fn to_array(self) -> [T; 5] {
        [self.theta1, self.theta2, self.theta3, self.x, self.t]
    }

    /// Distance in the product metric: periodic on the three angles,
    /// Euclidean on `x` and `t`.
    pub fn distance(&self, other: &Self) -> T {
        let d1 = angle_distance(self.theta1, other.theta1);
        let d2 = angle_distance(self.theta2, other.theta2);
        let d3 = angle_distance(self.theta3, other.theta3);
        let dx = self.x - other.x;
        let dt = self.t - other.t;
        (d1 * d1 + d2 * d2 + d3 * d3 + dx * dx + dt * dt).sqrt()
    }

    /// Distance ignoring `t` (the cross-section coordinates `N`).
    pub fn distance_n(&self, other: &Self) -> T {
        let d1 = angle_distance(self.theta1, other.theta1);
        let d2 = angle_distance(self.theta2, other.theta2);
        let d3 = angle_distance(self.theta3, other.theta3);
        let dx = self.x - other.x;
        (d1 * d1 + d2 * d2 + d3 * d3 + dx * dx).sqrt()
    }
}

/// The reversal involution `psi(theta-bar, x, t) = (theta-bar, x, -t)`.
///
/// An isometry of P; composing it with itself is the identity, and the
/// characteristic line field is equivariant under it (checked by
/// `verifier::verify_symmetry`).
pub fn psi<T: Real>(q: &PlugPoint<T>) -> PlugPoint<T> {
    PlugPoint { t: -q.t, ..*q }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::{PI, TAU};
    use proptest::prelude::*;

    #[test]
    fn wrap_reduces_into_primary_interval() {
        assert_abs_diff_eq!(wrap_angle(TAU + 0.5), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-0.5), TAU - 0.5, epsilon = 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
        // A tiny negative angle must not wrap to exactly tau.
        assert!(wrap_angle(-1e-20) < TAU);
    }

    #[test]
    fn angle_distance_is_symmetric_and_bounded() {
        assert_abs_diff_eq!(angle_distance(0.1, TAU - 0.1), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(angle_distance(0.0, PI), PI, epsilon = 1e-12);
    }

    #[test]
    fn psi_is_an_involution_fixing_the_middle_section() {
        let q = PlugPoint::new(0.3, 1.2, 4.0, 0.1, -0.7);
        assert_eq!(psi(&psi(&q)), q);
        let mid = PlugPoint::new(0.3, 1.2, 4.0, 0.1, 0.0);
        assert_eq!(psi(&mid).t, 0.0);
    }

    proptest! {
        #[test]
        fn wrapped_angles_stay_in_range(theta in -1e3f64..1e3f64) {
            let w = wrap_angle(theta);
            prop_assert!((0.0..TAU).contains(&w));
            // Same point on the circle.
            prop_assert!(angle_distance(w, theta) < 1e-9);
        }

        #[test]
        fn distance_is_a_metric_sample(
            a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0,
        ) {
            let p = PlugPoint::new(a, b, c, 0.0, 0.0);
            let q = PlugPoint::new(b, c, a, 0.1, 0.2);
            prop_assert!((p.distance(&q) - q.distance(&p)).abs() < 1e-12);
            prop_assert!(p.distance(&p) == 0.0);
        }
    }
}
