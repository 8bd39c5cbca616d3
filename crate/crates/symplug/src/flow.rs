//! The characteristic line field of the two-form and its flow.
//!
//! At every point the form has a one-dimensional kernel (maximal
//! nondegeneracy), spanned by the vector of signed 4x4 sub-Pfaffians
//!
//! ```text
//! v = ( -R B'_x (A cos + A'_th3 sin),
//!       -R B'_x (A sin - A'_th3 cos),
//!        0,
//!       -R^2 A A'_t,
//!        R^2 A A'_x )          with |v|^2 = c1.
//! ```
//!
//! The third component vanishes identically - `theta3` is a first integral of
//! the characteristic flow - and the `t`-component is nonnegative, so the flow
//! crosses the slab monotonically in `t` wherever it moves in `t` at all.
//!
//! The kernel is orientable but carries no preferred scale; this module fixes
//! the unit-speed orientation by three rules applied in order:
//! 1. if the `t`-component is resolvably nonzero, make it positive;
//! 2. otherwise align with the previous direction along the trajectory;
//! 3. otherwise (an isolated evaluation on an invariant torus) align with the
//!    reference trapping direction `(cos, sin, 0, 0, 0)` at `theta_tilde`.
//!
//! Integration is an adaptive embedded Runge-Kutta 5(4) pair with dense
//! output, exact-arclength stepping (the field is unit speed), slab-exit event
//! location by bisection, and a dwell-based detector for orbits captured by an
//! invariant torus.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{kernel_vector_closed, kernel_vector_raw, omega_from_profiles, SkewForm5};
use crate::params::PlugParams;
use crate::point::{angle_distance, PlugPoint};
use crate::profiles::{profile_a_unchecked, profile_b_unchecked, profiles_at, ProfileValue};
use crate::scalar::Real;
use crate::thresholds::{
    EVENT_LOCATION_TOL, KERNEL_DEGENERACY_RATIO, KERNEL_T_SIGN_MIN, MONOTONE_SLACK, TRAP_DWELL,
    TRAP_RADIUS,
};

/// A kernel evaluation: unit direction plus the certificates it was cut from.
#[derive(Debug, Clone, Copy)]
pub struct KernelSample<T> {
    /// Unit spanning vector, oriented by rules 1 and 3 (no trajectory
    /// context).
    pub direction: [T; 5],
    /// `|raw|^2`, the nondegeneracy certificate at this point.
    pub c1: T,
    /// Frobenius norm of the form, the scale `c1` is judged against.
    pub form_norm: T,
}

#[inline]
fn dot5<T: Real>(u: &[T; 5], v: &[T; 5]) -> T {
    let mut acc = T::zero();
    for i in 0..5 {
        acc = acc + u[i] * v[i];
    }
    acc
}

#[inline]
fn negate5<T: Real>(v: &mut [T; 5]) {
    for c in v.iter_mut() {
        *c = -*c;
    }
}

/// Unit kernel vector of an explicit skew form by the generic sub-Pfaffian
/// route, oriented only by the sign conventions that need no trajectory
/// context (rules 1 and 3). Works for any corank-one skew matrix; for the
/// plug form itself, [`kernel_direction`] goes through the closed form.
pub fn kernel_of_form<T: Real>(p: &PlugParams<T>, w: &SkewForm5<T>) -> Result<KernelSample<T>> {
    let raw = kernel_vector_raw(w);
    normalize_and_orient(p, raw, w.frobenius_norm(), None)
}

// The negation makes NaN norms take the error branch.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn normalize_and_orient<T: Real>(
    p: &PlugParams<T>,
    raw: [T; 5],
    fro: T,
    prev: Option<&[T; 5]>,
) -> Result<KernelSample<T>> {
    let c1 = dot5(&raw, &raw);
    let norm = c1.sqrt();
    let floor = T::of(KERNEL_DEGENERACY_RATIO) * fro * fro;
    if !(norm > floor) {
        return Err(Error::DegenerateForm {
            ratio: (norm / (fro * fro)).to_f64().unwrap(),
            floor: KERNEL_DEGENERACY_RATIO,
        });
    }
    let mut dir = raw;
    for c in dir.iter_mut() {
        *c = *c / norm;
    }
    orient(p, &mut dir, prev);
    Ok(KernelSample { direction: dir, c1, form_norm: fro })
}

fn kernel_from_profiles<T: Real>(
    p: &PlugParams<T>,
    theta3: T,
    a: &ProfileValue<T>,
    b: &ProfileValue<T>,
    prev: Option<&[T; 5]>,
) -> Result<KernelSample<T>> {
    let raw = kernel_vector_closed(p.r, theta3, a, b);
    let fro = omega_from_profiles(p.r, theta3, a, b).frobenius_norm();
    normalize_and_orient(p, raw, fro, prev)
}

/// Unit kernel direction at a domain point (rules 1 and 3 only).
pub fn kernel_direction<T: Real>(p: &PlugParams<T>, q: &PlugPoint<T>) -> Result<KernelSample<T>> {
    let (a, b) = profiles_at(p, q)?;
    kernel_from_profiles(p, q.theta3, &a, &b, None)
}

/// Applies the three orientation rules in order to a unit kernel vector.
fn orient<T: Real>(p: &PlugParams<T>, v: &mut [T; 5], prev: Option<&[T; 5]>) {
    if v[4].abs() > T::of(KERNEL_T_SIGN_MIN) {
        if v[4] < T::zero() {
            negate5(v);
        }
        return;
    }
    if let Some(w) = prev {
        if dot5(v, w) < T::zero() {
            negate5(v);
        }
        return;
    }
    if dot5(v, &p.torus_direction()) < T::zero() {
        negate5(v);
    }
}

/// Oriented unit kernel with trajectory context: `prev` is the direction at
/// the previous field evaluation, used when the `t`-component is too small to
/// fix the sign.
pub fn oriented_kernel<T: Real>(p: &PlugParams<T>, q: &PlugPoint<T>, prev: Option<&[T; 5]>) -> Result<[T; 5]> {
    let (a, b) = profiles_at(p, q)?;
    Ok(kernel_from_profiles(p, q.theta3, &a, &b, prev)?.direction)
}

/// Unchecked unit kernel for integrator stages, which may probe just outside
/// the closed slab.
fn kernel_unit_unchecked<T: Real>(p: &PlugParams<T>, y: &[T; 5], prev: Option<&[T; 5]>) -> Result<[T; 5]> {
    let a = profile_a_unchecked(p, y[2], y[3], y[4]);
    let b = profile_b_unchecked(p, y[3], y[4]);
    Ok(kernel_from_profiles(p, y[2], &a, &b, prev)?.direction)
}

/// Angle between the lines spanned by two unit vectors, in `[0, pi/2]`.
///
/// Computed as `2 asin(d / 2)` with `d` the distance to the nearer of
/// `+-w`, which stays fully accurate for tiny angles where
/// `acos(|<u, w>|)` loses half the mantissa; equal inputs give exactly zero.
pub fn line_angle<T: Real>(u: &[T; 5], w: &[T; 5]) -> T {
    let mut dm = T::zero();
    let mut dp = T::zero();
    for i in 0..5 {
        let a = u[i] - w[i];
        let b = u[i] + w[i];
        dm = dm + a * a;
        dp = dp + b * b;
    }
    let d = dm.min(dp).sqrt();
    let two = T::of(2.0);
    two * (d / two).min(T::one()).asin()
}

/// Distance from a point to the invariant torus `{theta3 = theta_tilde,
/// x = 0, t = -+1/2}` in the wrapped product metric (the torus spans the
/// first two angles, which therefore do not enter).
pub fn torus_distance<T: Real>(p: &PlugParams<T>, q: &PlugPoint<T>, upper: bool) -> T {
    let half = T::of(0.5);
    let dth = angle_distance(q.theta3, p.theta_tilde);
    let dt = q.t - if upper { half } else { -half };
    (dth * dth + q.x * q.x + dt * dt).sqrt()
}

/// Integration direction along the oriented kernel field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Knobs for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions<T> {
    /// Arclength budget.
    pub horizon: T,
    /// Per-step local error bound (sup norm over coordinates).
    pub tol: T,
    /// Step ceiling; also bounds how much arclength may pass between trap
    /// detector updates.
    pub max_step: T,
    /// Target spacing of stored samples (dense output in between steps).
    pub sample_spacing: T,
    /// Whether the dwell-based torus-capture detector may stop the run.
    pub trap_detection: bool,
    pub direction: Direction,
}

impl<T: Real> IntegrateOptions<T> {
    pub fn forward(horizon: T) -> Self {
        Self {
            horizon,
            tol: T::of(1e-10),
            max_step: T::one(),
            sample_spacing: T::of(0.1),
            trap_detection: true,
            direction: Direction::Forward,
        }
    }

    pub fn backward(horizon: T) -> Self {
        Self { direction: Direction::Backward, ..Self::forward(horizon) }
    }
}

/// Terminal condition of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FlowStatus {
    /// Crossed `t = 1`.
    ExitedTop,
    /// Crossed `t = -1`.
    ExitedBottom,
    /// Left through a slab face `|x| = eps`; anomalous for the plug field,
    /// whose `x`-faces are invariant.
    ExitedSide,
    /// Dwelled inside the capture radius of one invariant torus, at
    /// non-increasing distance, for the full dwell budget.
    TrappedNear { upper: bool, dist: f64, dwell: f64 },
    /// Arclength budget exhausted with none of the above.
    HorizonReached,
}

/// One stored point of a trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectorySample<T> {
    /// Arclength from the start.
    pub s: T,
    /// Position with angles wrapped into `[0, 2pi)`.
    pub point: PlugPoint<T>,
    /// Unwrapped coordinates (angles accumulate windings); the closure scan
    /// needs these to compare nearby passes on the same sheet.
    pub raw: [T; 5],
    /// Unit velocity (field value, direction-signed).
    pub velocity: [T; 5],
}

/// An integrated characteristic, sampled at roughly even arclength.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory<T> {
    pub samples: Vec<TrajectorySample<T>>,
    pub status: FlowStatus,
    pub arclength: T,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn start(&self) -> &TrajectorySample<T> {
        self.samples.first().expect("trajectory has at least its start")
    }

    pub fn end(&self) -> &TrajectorySample<T> {
        self.samples.last().expect("trajectory has at least its start")
    }
}

// Dormand-Prince 5(4) tableau (FSAL: the last stage is the next first one).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus embedded fourth-order weights (error estimator).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<T: Real>(y: &[T; 5], h: T, terms: &[(f64, &[T; 5])]) -> [T; 5] {
    let mut out = *y;
    for &(c, k) in terms {
        let ch = h * T::of(c);
        for i in 0..5 {
            out[i] = out[i] + ch * k[i];
        }
    }
    out
}

/// Cubic Hermite interpolant over one accepted step, `theta in [0, 1]`.
///
/// Written incrementally off `y0` so a component with `y0 == y1` and zero
/// slope at both ends comes back bitwise untouched; the basis-function form
/// `h00*y0 + h01*y1 + ...` rounds the two products separately and can drift
/// conserved coordinates by an ulp per interpolation.
fn hermite<T: Real>(y0: &[T; 5], f0: &[T; 5], y1: &[T; 5], f1: &[T; 5], h: T, theta: T) -> [T; 5] {
    let one = T::one();
    let two = T::of(2.0);
    let mut out = [T::zero(); 5];
    for i in 0..5 {
        let d = y1[i] - y0[i];
        let c = (one - two * theta) * d + h * ((theta - one) * f0[i] + theta * f1[i]);
        out[i] = y0[i] + theta * (d + (theta - one) * c);
    }
    out
}

struct TrapWindow<T> {
    upper: bool,
    start_s: T,
    last_dist: T,
}

/// Integrates the unit-speed characteristic field from `start`.
///
/// Terminates on slab exit (located by bisection on the dense output to
/// [`EVENT_LOCATION_TOL`] in arclength), on torus capture (if enabled), or at
/// the horizon. Errors are reserved for ill-posed inputs and genuine
/// integrator breakdown, not for any of those outcomes.
// The option guards use negated comparisons so NaN inputs fail closed.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn integrate<T: Real>(p: &PlugParams<T>, start: &PlugPoint<T>, opts: &IntegrateOptions<T>) -> Result<Trajectory<T>> {
    for (name, v) in [
        ("horizon", opts.horizon),
        ("tol", opts.tol),
        ("max_step", opts.max_step),
        ("sample_spacing", opts.sample_spacing),
    ] {
        if !(v > T::zero()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    // Reject out-of-domain starts up front (the stage evaluations are
    // deliberately unchecked).
    profiles_at(p, start)?;

    let sign = match opts.direction {
        Direction::Forward => T::one(),
        Direction::Backward => -T::one(),
    };
    let eps = p.eps;
    let one = T::one();

    let field = |y: &[T; 5], prev: Option<&[T; 5]>| -> Result<[T; 5]> {
        let mut v = kernel_unit_unchecked(p, y, prev)?;
        for c in v.iter_mut() {
            *c = *c * sign;
        }
        Ok(v)
    };
    let unsign = |k: &[T; 5]| -> [T; 5] {
        let mut v = *k;
        for c in v.iter_mut() {
            *c = *c * sign;
        }
        v
    };

    let mut y = start.to_array();
    let mut s = T::zero();
    let mut k1 = field(&y, None)?;
    // Feeds orientation rule 2; direction-agnostic.
    let mut prev: Option<[T; 5]> = Some(unsign(&k1));

    let mut samples: Vec<TrajectorySample<T>> = Vec::new();
    let push_sample = |samples: &mut Vec<TrajectorySample<T>>, s: T, y: &[T; 5], v: &[T; 5]| {
        samples.push(TrajectorySample {
            s,
            point: PlugPoint::new(y[0], y[1], y[2], y[3], y[4]),
            raw: *y,
            velocity: *v,
        });
    };
    push_sample(&mut samples, s, &y, &k1);
    let mut next_sample = opts.sample_spacing;

    // The profiles are exactly straight outside compactly supported bumps, so
    // the local error can vanish identically and the controller would grow the
    // step without bound; a step wider than a bump can then clear it with only
    // the zero-weight second stage inside, silently skipping the feature. Cap
    // the step at half the narrowest bump width so at least one weighted stage
    // always lands in any feature ahead.
    let h_cap = opts.max_step.min(T::of(0.5) * p.a_x.min(p.a_t).min(p.a_th));
    let mut h = h_cap.min(T::of(0.01)).min(opts.horizon);
    let mut window: Option<TrapWindow<T>> = None;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let tiny = T::of(1e-13);

    let status = 'outer: loop {
        if opts.horizon - s <= tiny {
            break FlowStatus::HorizonReached;
        }
        if accepted > 10_000_000 {
            return Err(Error::IntegrationFailure {
                reason: "step budget exhausted".into(),
                arclength: s.to_f64().unwrap(),
            });
        }
        h = h.min(opts.horizon - s);

        // One embedded 5(4) attempt.
        let k2 = field(&axpy(&y, h, &[(A21, &k1)]), prev.as_ref())?;
        let k3 = field(&axpy(&y, h, &[(A31, &k1), (A32, &k2)]), prev.as_ref())?;
        let k4 = field(&axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]), prev.as_ref())?;
        let k5 = field(&axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]), prev.as_ref())?;
        let k6 = field(
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            prev.as_ref(),
        )?;
        let y1 = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = field(&y1, prev.as_ref())?;
        let err_vec = axpy(
            &[T::zero(); 5],
            h,
            &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
        );
        let mut err = T::zero();
        for c in err_vec {
            err = err.max(c.abs());
        }

        if err > opts.tol {
            rejected += 1;
            let factor = T::of(0.9) * (opts.tol / err).powf(T::of(0.2));
            h = h * factor.max(T::of(0.2));
            if h < T::of(1e-14) {
                return Err(Error::IntegrationFailure {
                    reason: format!("step underflow with local error {err}"),
                    arclength: s.to_f64().unwrap(),
                });
            }
            continue;
        }

        accepted += 1;
        let s1 = s + h;

        // Exit events, earliest first. Conditions are one-sided so a start
        // exactly on a face does not retrigger, and the invariant x-faces
        // (where x is frozen bitwise) do not fire spuriously.
        let mut event: Option<(T, FlowStatus)> = None;
        let consider = |theta: T, st: FlowStatus, event: &mut Option<(T, FlowStatus)>| match event {
            Some((cur, _)) if *cur <= theta => {}
            _ => *event = Some((theta, st)),
        };
        let locate = |g: &dyn Fn(&[T; 5]) -> T| -> T {
            // g changes sign across [0, 1]; bisect on the Hermite interpolant.
            let mut lo = T::zero();
            let mut hi = T::one();
            let g_lo = g(&hermite(&y, &k1, &y1, &k7, h, lo));
            let flip = g_lo > T::zero();
            for _ in 0..200 {
                if (hi - lo) * h <= T::of(EVENT_LOCATION_TOL) {
                    break;
                }
                let mid = (lo + hi) * T::of(0.5);
                let gm = g(&hermite(&y, &k1, &y1, &k7, h, mid));
                let positive = gm > T::zero();
                if positive == flip {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        if y1[4] >= one && y[4] < one {
            consider(locate(&|z| z[4] - one), FlowStatus::ExitedTop, &mut event);
        }
        if y1[4] <= -one && y[4] > -one {
            consider(locate(&|z| z[4] + one), FlowStatus::ExitedBottom, &mut event);
        }
        if y1[3].abs() > eps && y[3].abs() <= eps {
            consider(locate(&|z| z[3].abs() - eps), FlowStatus::ExitedSide, &mut event);
        }

        if let Some((theta, st)) = event {
            let s_end = s + theta * h;
            while next_sample < s_end - tiny {
                let th = (next_sample - s) / h;
                let yd = hermite(&y, &k1, &y1, &k7, h, th);
                let vd = field(&yd, prev.as_ref())?;
                push_sample(&mut samples, next_sample, &yd, &vd);
                next_sample = next_sample + opts.sample_spacing;
            }
            let mut y_end = hermite(&y, &k1, &y1, &k7, h, theta);
            // Snap the located point exactly onto the face it crossed; the
            // bisection leaves it a hair past, which would fail the closed
            // domain check of whoever consumes the endpoint.
            match st {
                FlowStatus::ExitedTop => y_end[4] = one,
                FlowStatus::ExitedBottom => y_end[4] = -one,
                FlowStatus::ExitedSide => y_end[3] = if y1[3] > T::zero() { eps } else { -eps },
                _ => {}
            }
            let v_end = field(&y_end, prev.as_ref())?;
            push_sample(&mut samples, s_end, &y_end, &v_end);
            s = s_end;
            break st;
        }

        // Dense samples inside the accepted step.
        while next_sample < s1 - tiny {
            let th = (next_sample - s) / h;
            let yd = hermite(&y, &k1, &y1, &k7, h, th);
            let vd = field(&yd, prev.as_ref())?;
            push_sample(&mut samples, next_sample, &yd, &vd);
            next_sample = next_sample + opts.sample_spacing;
        }

        // Torus-capture detector, evaluated at step ends: inside the capture
        // radius, at distance non-increasing up to slack, for the full dwell.
        if opts.trap_detection {
            let q1 = PlugPoint::new(y1[0], y1[1], y1[2], y1[3], y1[4]);
            let d_lo = torus_distance(p, &q1, false);
            let d_up = torus_distance(p, &q1, true);
            let radius = T::of(TRAP_RADIUS);
            match window.as_mut() {
                None => {
                    let (d, upper) = if d_lo <= d_up { (d_lo, false) } else { (d_up, true) };
                    if d < radius {
                        window = Some(TrapWindow { upper, start_s: s1, last_dist: d });
                    }
                }
                Some(w) => {
                    let d = if w.upper { d_up } else { d_lo };
                    if d >= radius {
                        window = None;
                    } else if d > w.last_dist + T::of(MONOTONE_SLACK) {
                        w.start_s = s1;
                        w.last_dist = d;
                    } else {
                        w.last_dist = d;
                        if s1 - w.start_s >= T::of(TRAP_DWELL) {
                            push_sample(&mut samples, s1, &y1, &k7);
                            s = s1;
                            break 'outer FlowStatus::TrappedNear {
                                upper: w.upper,
                                dist: d.to_f64().unwrap(),
                                dwell: (s1 - w.start_s).to_f64().unwrap(),
                            };
                        }
                    }
                }
            }
        }

        s = s1;
        y = y1;
        prev = Some(unsign(&k7));
        k1 = k7;
        let factor = if err > T::zero() {
            (T::of(0.9) * (opts.tol / err).powf(T::of(0.2))).max(T::of(0.2)).min(T::of(5.0))
        } else {
            T::of(5.0)
        };
        h = (h * factor).min(h_cap);
    };

    if samples.last().map(|l| s - l.s > tiny).unwrap_or(true) {
        let v = field(&y, prev.as_ref())?;
        push_sample(&mut samples, s, &y, &v);
    }

    Ok(Trajectory { samples, status, arclength: s, accepted_steps: accepted, rejected_steps: rejected })
}

/// A near-closure of a trajectory: the smallest gap between two passes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosureGap {
    /// Distance between the two velocity-aligned passes (wrapped metric).
    pub gap: f64,
    /// Arclength of the earlier pass.
    pub s_from: f64,
    /// Arclength of the later pass.
    pub s_to: f64,
    /// Whether segment-segment refinement improved on the raw sample scan.
    pub refined: bool,
}

/// Finds the minimal distance between two passes of the trajectory separated
/// by at least `min_separation` in arclength, restricted to pairs whose unit
/// velocities align (so only genuine near-closures count, not transversal
/// crossings).
///
/// Two passes: a scan over stored samples picks the candidate, then a
/// segment-segment minimization on the unwrapped coordinates around it
/// resolves closures that fall between samples. Returns `None` when no sample
/// pair satisfies the separation and alignment constraints.
pub fn closure_gap<T: Real>(traj: &Trajectory<T>, min_separation: T) -> Option<ClosureGap> {
    let n = traj.samples.len();
    let min_sep = min_separation.to_f64().unwrap();
    let mut ss = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    let mut pts = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for smp in &traj.samples {
        ss.push(smp.s.to_f64().unwrap());
        let mut r = [0.0; 5];
        let mut v = [0.0; 5];
        for i in 0..5 {
            r[i] = smp.raw[i].to_f64().unwrap();
            v[i] = smp.velocity[i].to_f64().unwrap();
        }
        raw.push(r);
        pts.push(PlugPoint::new(r[0], r[1], r[2], r[3], r[4]));
        vel.push(v);
    }

    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            if ss[j] - ss[i] < min_sep {
                continue;
            }
            let mut align = 0.0;
            for k in 0..5 {
                align += vel[i][k] * vel[j][k];
            }
            if align < crate::thresholds::CLOSURE_ALIGNMENT_MIN {
                continue;
            }
            let d = pts[i].distance(&pts[j]);
            if best.map(|(bd, _, _)| d < bd).unwrap_or(true) {
                best = Some((d, i, j));
            }
        }
    }
    let (point_gap, bi, bj) = best?;

    // Segment refinement near the winning pair, on unwrapped coordinates with
    // the later pass shifted onto the earlier pass's sheet.
    let mut out =
        ClosureGap { gap: point_gap, s_from: ss[bi], s_to: ss[bj], refined: false };
    let lo_i = bi.saturating_sub(2);
    let hi_i = (bi + 2).min(n.saturating_sub(2));
    let lo_j = bj.saturating_sub(2);
    let hi_j = (bj + 2).min(n.saturating_sub(2));
    for i in lo_i..=hi_i {
        for j in lo_j.max(i + 1)..=hi_j {
            if ss[j] - ss[i + 1] < 0.5 * min_sep {
                continue;
            }
            let mut b0 = raw[j];
            let mut b1 = raw[j + 1];
            for k in 0..3 {
                let shift = ((raw[i][k] - b0[k]) / core::f64::consts::TAU).round() * core::f64::consts::TAU;
                b0[k] += shift;
                b1[k] += shift;
            }
            let (d, u, w) = segment_gap(&raw[i], &raw[i + 1], &b0, &b1);
            if d < out.gap {
                out = ClosureGap {
                    gap: d,
                    s_from: ss[i] + u * (ss[i + 1] - ss[i]),
                    s_to: ss[j] + w * (ss[j + 1] - ss[j]),
                    refined: true,
                };
            }
        }
    }
    Some(out)
}

/// Minimal distance between segments `[a0, a1]` and `[b0, b1]` in R^5, with
/// the minimizing parameters. Clamped quadratic minimization: the interior
/// critical point plus all four edge minimizers are enumerated.
fn segment_gap(a0: &[f64; 5], a1: &[f64; 5], b0: &[f64; 5], b1: &[f64; 5]) -> (f64, f64, f64) {
    let mut da = [0.0; 5];
    let mut db = [0.0; 5];
    let mut d0 = [0.0; 5];
    for k in 0..5 {
        da[k] = a1[k] - a0[k];
        db[k] = b1[k] - b0[k];
        d0[k] = a0[k] - b0[k];
    }
    let dot = |u: &[f64; 5], v: &[f64; 5]| -> f64 { (0..5).map(|k| u[k] * v[k]).sum() };
    let daa = dot(&da, &da);
    let dbb = dot(&db, &db);
    let dab = dot(&da, &db);
    let ad0 = dot(&da, &d0);
    let bd0 = dot(&db, &d0);
    let dist_at = |u: f64, w: f64| -> f64 {
        let mut acc = 0.0;
        for k in 0..5 {
            let c = d0[k] + u * da[k] - w * db[k];
            acc += c * c;
        }
        acc.sqrt()
    };
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(5);
    let det = daa * dbb - dab * dab;
    if det > 1e-12 * daa * dbb {
        // grad = 0: daa u - dab w = -ad0; dab u - dbb w = -bd0.
        let u = (-ad0 * dbb + dab * bd0) / det;
        let w = (dab * u + bd0) / dbb;
        if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&w) {
            candidates.push((u, w));
        }
    }
    for u in [0.0, 1.0] {
        if dbb > 0.0 {
            candidates.push((u, clamp((bd0 + u * dab) / dbb)));
        } else {
            candidates.push((u, 0.0));
        }
    }
    for w in [0.0, 1.0] {
        if daa > 0.0 {
            candidates.push((clamp((-ad0 + w * dab) / daa), w));
        } else {
            candidates.push((0.0, w));
        }
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for (u, w) in candidates {
        let d = dist_at(u, w);
        if d < best.0 {
            best = (d, u, w);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::eval_omega;
    use crate::thresholds::{
        CLOSURE_GAP_CONTROL_CEIL, CLOSURE_GAP_FLOOR, KERNEL_RESIDUAL_TOL,
    };
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> PlugParams<f64> {
        PlugParams::default()
    }

    /// Unit nullspace vector by Gaussian elimination with partial pivoting -
    /// an algebra-free oracle for the sub-Pfaffian kernel.
    fn nullspace_oracle(w: &SkewForm5<f64>) -> [f64; 5] {
        let mut m = [[0.0f64; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                m[i][j] = w.entry(i, j);
            }
        }
        let mut piv_cols = Vec::new();
        let mut row = 0;
        for col in 0..5 {
            let (best, mag) = (row..5).map(|r| (r, m[r][col].abs())).fold(
                (row, -1.0),
                |acc, cur| if cur.1 > acc.1 { cur } else { acc },
            );
            if mag < 1e-12 {
                continue;
            }
            m.swap(row, best);
            for r in 0..5 {
                if r != row {
                    let f = m[r][col] / m[row][col];
                    for c in 0..5 {
                        m[r][c] -= f * m[row][c];
                    }
                }
            }
            piv_cols.push((row, col));
            row += 1;
            if row == 5 {
                break;
            }
        }
        assert_eq!(piv_cols.len(), 4, "corank must be exactly one");
        let free = (0..5).find(|c| !piv_cols.iter().any(|&(_, pc)| pc == *c)).unwrap();
        let mut v = [0.0; 5];
        v[free] = 1.0;
        for &(r, c) in &piv_cols {
            v[c] = -m[r][free] / m[r][c];
        }
        let n = dot5(&v, &v).sqrt();
        for c in v.iter_mut() {
            *c /= n;
        }
        v
    }

    #[test]
    fn kernel_matches_elimination_nullspace() {
        let p = params();
        let mut sampler = crate::sample::PointSampler::new(&p, 11);
        for _ in 0..300 {
            let q = sampler.next_point();
            let w = eval_omega(&p, &q).unwrap();
            let k = kernel_direction(&p, &q).unwrap();
            let oracle = nullspace_oracle(&w);
            let cosang = dot5(&k.direction, &oracle).abs();
            assert!(cosang > 1.0 - 1e-9, "kernel misaligned with oracle at {q:?}: {cosang}");
        }
    }

    #[test]
    fn kernel_is_unit_with_small_residual_and_frozen_theta3() {
        let p = params();
        let mut sampler = crate::sample::PointSampler::new(&p, 13);
        for _ in 0..500 {
            let q = sampler.next_point();
            let w = eval_omega(&p, &q).unwrap();
            let k = kernel_direction(&p, &q).unwrap();
            assert_abs_diff_eq!(dot5(&k.direction, &k.direction), 1.0, epsilon = 1e-12);
            // theta3 is a first integral: the third component vanishes
            // identically (a cancellation in the Pfaffians, so exact).
            assert_eq!(k.direction[2], 0.0);
            let res = w.apply(&k.direction);
            let scale = k.form_norm.max(1.0);
            for r in res {
                assert!(r.abs() <= KERNEL_RESIDUAL_TOL * scale, "residual {r}");
            }
        }
    }

    #[test]
    fn collar_kernel_is_exactly_the_time_axis() {
        let p = params();
        for q in [
            PlugPoint::new(0.2, 5.0, p.theta_tilde, 0.15, 0.3), // outside x-bump
            PlugPoint::new(1.0, 1.0, p.theta_tilde, 0.0, 0.0),  // t-bumps dead
            PlugPoint::new(0.0, 0.0, 1.0, -0.2, -0.9),          // both
        ] {
            let k = kernel_direction(&p, &q).unwrap();
            assert_eq!(k.direction, [0.0, 0.0, 0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn torus_kernel_is_the_reference_trapping_direction() {
        let p = params();
        for upper in [false, true] {
            let q = p.torus_point(upper, 0.7, 2.9);
            let k = kernel_direction(&p, &q).unwrap();
            let d = p.torus_direction();
            assert!(dot5(&k.direction, &d) > 1.0 - 1e-12);
            assert_eq!(k.direction[2], 0.0);
            assert_eq!(k.direction[3], 0.0);
            assert_eq!(k.direction[4], 0.0);
        }
    }

    #[test]
    fn kernel_is_exactly_anti_equivariant_under_time_reversal() {
        use crate::profiles::{profile_a, profile_b};
        let p = params();
        let mut sampler = crate::sample::PointSampler::new(&p, 19);
        for _ in 0..500 {
            let q = sampler.next_point();
            let qr = crate::point::psi(&q);
            let eval = |q: &PlugPoint<f64>| {
                let a = profile_a(&p, q.theta3, q.x, q.t).unwrap();
                let b = profile_b(&p, q.x, q.t).unwrap();
                kernel_vector_closed(p.r, q.theta3, &a, &b)
            };
            let v = eval(&q);
            let vr = eval(&qr);
            // v(psi q) = -d.psi v(q), bitwise: the profile parities are exact
            // and each component flips through the sign of a single factor.
            assert_eq!(vr[0], -v[0]);
            assert_eq!(vr[1], -v[1]);
            assert_eq!(vr[2], 0.0);
            assert_eq!(vr[3], -v[3]);
            assert_eq!(vr[4], v[4]);
            // The generic Pfaffian route satisfies the same relation up to
            // roundoff in its product cancellations.
            let pv = kernel_vector_raw(&eval_omega(&p, &q).unwrap());
            let pvr = kernel_vector_raw(&eval_omega(&p, &qr).unwrap());
            let scale = pv.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
            for i in 0..5 {
                let flip = if i == 4 { 1.0 } else { -1.0 };
                assert!((pvr[i] - flip * pv[i]).abs() <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn degenerate_form_is_reported_not_divided_by() {
        let p = PlugParams { c_b: 0.0, ..params() };
        let q = p.torus_point(false, 0.0, 0.0);
        assert!(matches!(kernel_direction(&p, &q), Err(Error::DegenerateForm { .. })));
        let opts = IntegrateOptions::forward(10.0);
        assert!(integrate(&p, &q, &opts).is_err());
    }

    #[test]
    fn out_of_domain_start_is_rejected() {
        let p = params();
        let q = PlugPoint::new(0.0, 0.0, 0.0, 0.3, 0.0);
        assert!(matches!(
            integrate(&p, &q, &IntegrateOptions::forward(1.0)),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn straight_transit_freezes_every_non_time_coordinate_bitwise() {
        let p = params();
        let entry = PlugPoint::new(1.2, 2.3, 0.7, 0.15, -1.0);
        let traj = integrate(&p, &entry, &IntegrateOptions::forward(10.0)).unwrap();
        assert_eq!(traj.status, FlowStatus::ExitedTop);
        let end = traj.end();
        assert_eq!(end.raw[0], entry.theta1);
        assert_eq!(end.raw[1], entry.theta2);
        assert_eq!(end.raw[2], entry.theta3);
        assert_eq!(end.raw[3], entry.x);
        assert_eq!(end.raw[4], 1.0, "exit point snaps exactly onto the face");
        assert_abs_diff_eq!(traj.arclength, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn theta_collar_transit_returns_to_its_entry_angles() {
        // Inside the x-bump but with the theta3-bump dead: the orbit drifts
        // in the first two angles yet the drift integrates to zero by the
        // t-parity of the profiles, so exit = entry there too. x and theta3
        // are frozen bitwise (their velocity components vanish exactly).
        let p = params();
        let entry = PlugPoint::new(0.4, 5.5, p.theta_tilde + 2.0, 0.05, -1.0);
        let traj = integrate(&p, &entry, &IntegrateOptions::forward(10.0)).unwrap();
        assert_eq!(traj.status, FlowStatus::ExitedTop);
        let end = traj.end();
        assert_eq!(end.raw[2], entry.theta3);
        assert_eq!(end.raw[3], entry.x);
        assert_abs_diff_eq!(end.raw[0], entry.theta1, epsilon = 1e-8);
        assert_abs_diff_eq!(end.raw[1], entry.theta2, epsilon = 1e-8);
        // It genuinely drifted in between.
        let max_drift = traj
            .samples
            .iter()
            .map(|s| (s.raw[0] - entry.theta1).abs())
            .fold(0.0, f64::max);
        assert!(max_drift > 1e-4, "expected visible drift, got {max_drift}");
    }

    #[test]
    fn curved_transit_exit_matches_entry() {
        let p = params();
        // Inside all bump supports: the full deformation acts on this orbit.
        let entry = PlugPoint::new(2.0, 0.3, p.theta_tilde + 0.2, 0.04, -1.0);
        let traj = integrate(&p, &entry, &IntegrateOptions::forward(50.0)).unwrap();
        assert_eq!(traj.status, FlowStatus::ExitedTop);
        let end = traj.end();
        assert_abs_diff_eq!(end.raw[0], entry.theta1, epsilon = 1e-6);
        assert_abs_diff_eq!(end.raw[1], entry.theta2, epsilon = 1e-6);
        assert_eq!(end.raw[2], entry.theta3);
        assert_abs_diff_eq!(end.raw[3], entry.x, epsilon = 1e-6);
        assert_eq!(end.raw[4], 1.0);
        // The x-coordinate moved along the way (the transit is curved).
        let max_x_excursion =
            traj.samples.iter().map(|s| (s.raw[3] - entry.x).abs()).fold(0.0, f64::max);
        assert!(max_x_excursion > 1e-5, "expected a curved transit, got {max_x_excursion}");
    }

    #[test]
    fn backward_integration_reverses_a_transit() {
        let p = params();
        let entry = PlugPoint::new(0.3, 4.0, p.theta_tilde + 0.3, 0.03, -1.0);
        let fwd = integrate(&p, &entry, &IntegrateOptions::forward(50.0)).unwrap();
        assert_eq!(fwd.status, FlowStatus::ExitedTop);
        let back = integrate(&p, &fwd.end().point, &IntegrateOptions::backward(50.0)).unwrap();
        assert_eq!(back.status, FlowStatus::ExitedBottom);
        let tol = 1e-10;
        let budget = 100.0 * tol * (1.0 + fwd.arclength);
        assert!(back.end().point.distance(&entry) <= budget.max(1e-7));
        assert_abs_diff_eq!(back.arclength, fwd.arclength, epsilon = 1e-6);
    }

    #[test]
    fn exits_agree_across_tolerances() {
        let p = params();
        let entry = PlugPoint::new(2.0, 0.3, p.theta_tilde + 0.2, 0.04, -1.0);
        let mut exits = Vec::new();
        for tol in [1e-6, 1e-10, 1e-12] {
            let opts = IntegrateOptions { tol, ..IntegrateOptions::forward(50.0) };
            let traj = integrate(&p, &entry, &opts).unwrap();
            assert_eq!(traj.status, FlowStatus::ExitedTop);
            exits.push((traj.end().point, traj.arclength, traj.accepted_steps));
        }
        assert!(exits[0].0.distance(&exits[2].0) < 1e-5);
        assert!(exits[1].0.distance(&exits[2].0) < 1e-8);
        // Tighter tolerance costs more steps.
        assert!(exits[2].2 > exits[0].2);
    }

    #[test]
    fn leaf_orbit_is_captured_with_x_frozen_at_zero() {
        let p = params();
        let entry = PlugPoint::new(1.0, 2.0, p.theta_tilde, 0.0, -1.0);
        let traj = integrate(&p, &entry, &IntegrateOptions::forward(1000.0)).unwrap();
        match traj.status {
            FlowStatus::TrappedNear { upper, dist, dwell } => {
                assert!(!upper);
                assert!(dist < 1e-3, "final distance {dist}");
                assert!(dwell >= TRAP_DWELL);
            }
            other => panic!("expected capture, got {other:?}"),
        }
        assert!(traj.arclength < 150.0, "capture should resolve quickly, took {}", traj.arclength);
        for smp in &traj.samples {
            assert_eq!(smp.raw[3], 0.0, "x must stay exactly on the leaf");
            assert_eq!(smp.raw[2], entry.theta3, "theta3 must stay frozen");
        }
        // t approaches -1/2 from below and never crosses it.
        assert!(traj.samples.iter().all(|s| s.raw[4] < -0.5 + 1e-12));
    }

    #[test]
    fn trap_detection_toggle_controls_termination() {
        let p = params();
        let start = p.torus_point(false, 0.0, 0.0);
        let on = integrate(&p, &start, &IntegrateOptions::forward(300.0)).unwrap();
        assert!(matches!(on.status, FlowStatus::TrappedNear { upper: false, .. }));
        assert!((on.arclength - TRAP_DWELL).abs() < 2.0);
        let opts = IntegrateOptions { trap_detection: false, ..IntegrateOptions::forward(300.0) };
        let off = integrate(&p, &start, &opts).unwrap();
        assert_eq!(off.status, FlowStatus::HorizonReached);
        assert_abs_diff_eq!(off.arclength, 300.0, epsilon = 1e-9);
    }

    #[test]
    fn torus_orbit_is_the_ideal_linear_flow() {
        let p = params();
        let start = p.torus_point(false, 0.25, 0.75);
        let opts = IntegrateOptions { trap_detection: false, ..IntegrateOptions::forward(100.0) };
        let traj = integrate(&p, &start, &opts).unwrap();
        let (c, s) = (p.theta_tilde.cos(), p.theta_tilde.sin());
        for smp in &traj.samples {
            assert_eq!(smp.raw[2], start.theta3);
            assert_eq!(smp.raw[3], 0.0);
            assert_eq!(smp.raw[4], -0.5);
            assert_abs_diff_eq!(smp.raw[0], start.theta1 + smp.s * c, epsilon = 1e-8);
            assert_abs_diff_eq!(smp.raw[1], start.theta2 + smp.s * s, epsilon = 1e-8);
        }
    }

    /// Brute-force closure oracle for an ideal linear torus flow: scan the
    /// wrapped distance of `(s cos, s sin)` from the origin over a fine grid
    /// of arclength separations.
    fn linear_flow_gap_oracle(theta: f64, lo: f64, hi: f64) -> f64 {
        let (c, s) = (theta.cos(), theta.sin());
        let mut best = f64::INFINITY;
        let mut delta = lo;
        while delta <= hi {
            let d1 = angle_distance(delta * c, 0.0);
            let d2 = angle_distance(delta * s, 0.0);
            best = best.min((d1 * d1 + d2 * d2).sqrt());
            delta += 1e-3;
        }
        best
    }

    #[test]
    fn golden_slope_gap_matches_the_ideal_flow_oracle() {
        let p = params();
        let horizon = 200.0;
        let start = p.torus_point(false, 0.0, 0.0);
        let opts = IntegrateOptions { trap_detection: false, ..IntegrateOptions::forward(horizon) };
        let traj = integrate(&p, &start, &opts).unwrap();
        let gap = closure_gap(&traj, 1.0).expect("long trajectory has candidate pairs");
        let oracle = linear_flow_gap_oracle(p.theta_tilde, 1.0, horizon);
        assert!(gap.gap > CLOSURE_GAP_FLOOR, "gap {} above the aperiodicity floor", gap.gap);
        assert!(
            (gap.gap - oracle).abs() <= 0.2 * oracle,
            "integrated gap {} vs ideal-flow oracle {oracle}",
            gap.gap
        );
    }

    #[test]
    fn rational_slope_closes_at_the_predicted_length() {
        // tan = 1 closes after one wrap of each angle: period 2 pi sqrt(2).
        let p = params().with_tan(1.0);
        let start = p.torus_point(false, 0.0, 0.0);
        let opts = IntegrateOptions { trap_detection: false, ..IntegrateOptions::forward(12.0) };
        let traj = integrate(&p, &start, &opts).unwrap();
        let gap = closure_gap(&traj, 1.0).unwrap();
        assert!(gap.gap <= CLOSURE_GAP_CONTROL_CEIL, "rational slope must close, gap {}", gap.gap);
        assert!(gap.refined, "closure falls between samples and needs refinement");
        let period = core::f64::consts::TAU * 2.0f64.sqrt();
        assert_abs_diff_eq!(gap.s_to - gap.s_from, period, epsilon = 1e-2);
    }

    #[test]
    fn synthetic_wrapping_line_closes_exactly() {
        // Hand-built trajectory: unit speed straight line in theta1 only.
        let mut samples = Vec::new();
        let mut s = 0.0;
        while s <= core::f64::consts::TAU + 0.35 {
            samples.push(TrajectorySample {
                s,
                point: PlugPoint::new(s, 1.0, 2.0, 0.1, 0.0),
                raw: [s, 1.0, 2.0, 0.1, 0.0],
                velocity: [1.0, 0.0, 0.0, 0.0, 0.0],
            });
            s += 0.1;
        }
        let traj = Trajectory {
            samples,
            status: FlowStatus::HorizonReached,
            arclength: s,
            accepted_steps: 0,
            rejected_steps: 0,
        };
        let gap = closure_gap(&traj, 1.0).unwrap();
        assert!(gap.gap <= 1e-9, "collinear wrap must close to roundoff, got {}", gap.gap);
        assert_abs_diff_eq!(gap.s_to - gap.s_from, core::f64::consts::TAU, epsilon = 1e-6);
    }

    #[test]
    fn closure_gap_respects_separation_and_alignment() {
        // Too short for the separation: no candidates at all.
        let p = params();
        let start = p.torus_point(false, 0.0, 0.0);
        let opts = IntegrateOptions { trap_detection: false, ..IntegrateOptions::forward(2.0) };
        let traj = integrate(&p, &start, &opts).unwrap();
        assert!(closure_gap(&traj, 5.0).is_none());
    }

    #[test]
    fn backward_event_location_is_exact_on_the_collar() {
        let p = params();
        let start = PlugPoint::new(0.0, 0.0, 1.0, 0.2, 0.0);
        let traj = integrate(&p, &start, &IntegrateOptions::backward(5.0)).unwrap();
        assert_eq!(traj.status, FlowStatus::ExitedBottom);
        assert_abs_diff_eq!(traj.end().raw[4], -1.0, epsilon = 1e-11);
        assert_abs_diff_eq!(traj.arclength, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn horizon_cut_is_exact() {
        let p = params();
        let entry = PlugPoint::new(2.0, 0.3, p.theta_tilde + 0.2, 0.04, -1.0);
        let opts = IntegrateOptions::forward(0.5);
        let traj = integrate(&p, &entry, &opts).unwrap();
        assert_eq!(traj.status, FlowStatus::HorizonReached);
        assert_abs_diff_eq!(traj.arclength, 0.5, epsilon = 1e-12);
        assert_eq!(traj.end().s, traj.arclength);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        /// Every bottom entry either transits with matching exit or is
        /// captured; nothing leaves sideways or stalls.
        #[test]
        fn entries_transit_or_get_captured(
            th1 in 0.0f64..core::f64::consts::TAU,
            th2 in 0.0f64..core::f64::consts::TAU,
            th3 in 0.0f64..core::f64::consts::TAU,
            x in -0.24f64..0.24,
        ) {
            let p = params();
            let entry = PlugPoint::new(th1, th2, th3, x, -1.0);
            let traj = integrate(&p, &entry, &IntegrateOptions::forward(400.0)).unwrap();
            match traj.status {
                FlowStatus::ExitedTop => {
                    let end = traj.end();
                    prop_assert!((end.raw[0] - entry.theta1).abs() < 1e-5);
                    prop_assert!((end.raw[1] - entry.theta2).abs() < 1e-5);
                    prop_assert!((end.raw[3] - entry.x).abs() < 1e-5);
                    prop_assert_eq!(end.raw[2], entry.theta3);
                }
                FlowStatus::TrappedNear { .. } | FlowStatus::HorizonReached => {
                    // Orbits passing very near the trapped leaf may need more
                    // than the test horizon; both are legitimate non-transits.
                }
                other => prop_assert!(false, "unexpected status {:?}", other),
            }
        }
    }
}
