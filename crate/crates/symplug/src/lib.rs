//! An explicit "plug" two-form for interrupting characteristic flows, with a
//! numerical verifier for every property it is supposed to have.
//!
//! The plug lives on `P = [-1, 1]_t x [-eps, eps]_x x T^3` and is the exterior
//! derivative of `A eta + B dt`, where `eta` is a fixed circle-valued one-form
//! on `T^3` and `A`, `B` are bump-function profiles. The form is maximally
//! nondegenerate, so its kernel is a line field; the induced flow enters the
//! slab at `t = -1`, and either crosses to `t = 1` with exit matching entry,
//! or - on one distinguished leaf - spirals onto an invariant two-torus
//! carrying an irrational linear flow and never leaves.
//!
//! Module map:
//!
//! - [`params`]: parameter set, validation, config parsing.
//! - [`profiles`]: the `A` and `B` profiles and their axiom checks.
//! - [`forms`]: the two-form, nondegeneracy certificate `c1`, homotopy, sweep.
//! - [`flow`]: kernel field, orientation, adaptive integrator, closure gap.
//! - [`verifier`]: the named property checks with machine-readable reports.
//! - [`embeddings`]: the maps into standard symplectic spaces and their
//!   pullback identities.
//! - [`scene`]: a toy ambient flow box demonstrating orbit destruction.
//!
//! The core is generic over the scalar via [`scalar::Real`] (`f32` / `f64`);
//! the aliases below fix `f64` for ordinary use.

// Indexed loops mirror the tensor index notation used throughout the
// numerics (`m[i][j]`, `v[k]`); iterator rewrites obscure which index runs.
#![allow(clippy::needless_range_loop)]

pub mod bump;
pub mod embeddings;
pub mod error;
pub mod flow;
pub mod forms;
pub mod params;
pub mod point;
pub mod profiles;
pub mod report;
pub mod sample;
pub mod scalar;
pub mod scene;
pub mod thresholds;
pub mod verifier;

pub use error::{Error, Result};

/// Default-precision parameter set.
pub type Params = params::PlugParams<f64>;
/// Default-precision domain point.
pub type Point = point::PlugPoint<f64>;
/// Default-precision two-form value.
pub type Form = forms::SkewForm5<f64>;
