//! Scalar abstraction for the core geometry.
//!
//! Everything numeric in this crate is generic over [`Real`] so the same
//! formulas run at `f32` or `f64`. The shipped tolerances are calibrated for
//! `f64`; the crate root exports `f64` aliases as the default working types.

use core::fmt::{Debug, Display};

/// Floating-point scalar the geometry is generic over.
///
/// A thin marker on top of `num_traits::Float` (trig, exp, sqrt, ...) plus
/// `FromPrimitive` so `f64` literals can be injected into generic code.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`. Panics on values a float type
    /// cannot represent at all (never the case for the constants used here).
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal must be representable")
    }

    /// Widens to `f64` for reporting; exact for `f32` and `f64`.
    #[inline]
    fn widen(self) -> f64 {
        self.to_f64().expect("float widens to f64")
    }

    /// Shorthand for `2 * pi`.
    #[inline]
    fn tau() -> Self {
        Self::of(core::f64::consts::TAU)
    }
}

impl Real for f32 {}
impl Real for f64 {}
