//! The two-form, its nondegeneracy certificate, and the straight-line
//! homotopy to the product form.
//!
//! Everything is expressed in the fixed coordinate basis
//! `(theta1, theta2, theta3, x, t)`. With `eta = R cos(theta3) d.theta1 +
//! R sin(theta3) d.theta2` the plug form is
//!
//! ```text
//! omega = d(A eta + B dt) = dA ^ eta + A d.eta + B'_x dx ^ dt
//! ```
//!
//! For an antisymmetric matrix on an odd-dimensional space the characteristic
//! polynomial is `l^5 + c3 l^3 + c1 l`; maximal nondegeneracy is `c1 > 0`.
//! Here `c1` has the closed form
//!
//! ```text
//! c1 = R^4 A^2 (A'_x^2 + A'_t^2) + R^2 B'_x^2 (A^2 + A'_th3^2)
//! ```
//!
//! which this module cross-checks against a brute-force principal-minor
//! expansion of the characteristic polynomial.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::PlugParams;
use crate::point::PlugPoint;
use crate::profiles::{profile_a, profile_b, ProfileValue};
use crate::sample::PointSampler;
use crate::scalar::Real;
use crate::thresholds::C1_ORACLE_REL_TOL;

/// A one-form coefficient vector in the fixed basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoVector5<T>(pub [T; 5]);

impl<T: Real> CoVector5<T> {
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut m = T::zero();
        for i in 0..5 {
            m = m.max((self.0[i] - other.0[i]).abs());
        }
        m
    }
}

/// An antisymmetric 5x5 matrix: the value of a two-form on the coordinate
/// basis, `m[i][j] = w(e_i, e_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewForm5<T> {
    m: [[T; 5]; 5],
}

impl<T: Real> SkewForm5<T> {
    /// Builds from the strict upper triangle, filling the rest by
    /// antisymmetry. `upper` lists `(i, j, value)` with `i < j`.
    pub fn from_upper(upper: &[(usize, usize, T)]) -> Self {
        let mut m = [[T::zero(); 5]; 5];
        for &(i, j, v) in upper {
            assert!(i < j && j < 5, "upper-triangle index ({i}, {j})");
            m[i][j] = v;
            m[j][i] = -v;
        }
        Self { m }
    }

    pub fn zero() -> Self {
        Self { m: [[T::zero(); 5]; 5] }
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> T {
        self.m[i][j]
    }

    /// `w(u, v)` for two tangent vectors.
    pub fn pair(&self, u: &[T; 5], v: &[T; 5]) -> T {
        let mut acc = T::zero();
        for i in 0..5 {
            for j in 0..5 {
                acc = acc + u[i] * self.m[i][j] * v[j];
            }
        }
        acc
    }

    /// Matrix-vector product (interior product up to index placement).
    pub fn apply(&self, v: &[T; 5]) -> [T; 5] {
        let mut out = [T::zero(); 5];
        for i in 0..5 {
            for j in 0..5 {
                out[i] = out[i] + self.m[i][j] * v[j];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        let mut acc = T::zero();
        for row in &self.m {
            for &v in row {
                acc = acc + v * v;
            }
        }
        acc.sqrt()
    }

    pub fn max_abs_entry(&self) -> T {
        let mut m = T::zero();
        for row in &self.m {
            for &v in row {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut m = T::zero();
        for i in 0..5 {
            for j in 0..5 {
                m = m.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        m
    }

    pub fn scale(&self, f: T) -> Self {
        let mut m = self.m;
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * f;
            }
        }
        Self { m }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = self.m;
        for i in 0..5 {
            for j in 0..5 {
                m[i][j] = m[i][j] + other.m[i][j];
            }
        }
        Self { m }
    }
}

/// `eta = R cos(theta3) d.theta1 + R sin(theta3) d.theta2`.
pub fn eval_eta<T: Real>(p: &PlugParams<T>, theta3: T) -> CoVector5<T> {
    CoVector5([p.r * theta3.cos(), p.r * theta3.sin(), T::zero(), T::zero(), T::zero()])
}

/// Assembles the matrix of `d(A eta + B dt)` from profile evaluations.
///
/// This is the single place the wedge algebra is spelled out; `eval_omega`,
/// the homotopy form and the boundary form all route through it.
pub fn omega_from_profiles<T: Real>(r: T, theta3: T, a: &ProfileValue<T>, b: &ProfileValue<T>) -> SkewForm5<T> {
    let (c, s) = (theta3.cos(), theta3.sin());
    SkewForm5::from_upper(&[
        // dA ^ eta contributes through A'_th3, A'_x, A'_t; A d.eta through A.
        (0, 2, r * (a.value * s - a.d_th3 * c)),
        (1, 2, -(r * (a.value * c + a.d_th3 * s))),
        (0, 3, -(r * a.d_x * c)),
        (1, 3, -(r * a.d_x * s)),
        (0, 4, -(r * a.d_t * c)),
        (1, 4, -(r * a.d_t * s)),
        // dB ^ dt survives only through B'_x.
        (3, 4, b.d_x),
    ])
}

/// The plug form at a domain point.
pub fn eval_omega<T: Real>(p: &PlugParams<T>, q: &PlugPoint<T>) -> Result<SkewForm5<T>> {
    let a = profile_a(p, q.theta3, q.x, q.t)?;
    let b = profile_b(p, q.x, q.t)?;
    Ok(omega_from_profiles(p.r, q.theta3, &a, &b))
}

/// The boundary normal form `rho = d((1+x) eta) = dx ^ eta + (1+x) d.eta`,
/// which `omega` equals exactly on the boundary collar and which the ambient
/// flow-box form pulls back to.
pub fn eval_rho<T: Real>(p: &PlugParams<T>, theta3: T, x: T) -> SkewForm5<T> {
    let a = ProfileValue { value: T::one() + x, d_x: T::one(), d_t: T::zero(), d_th3: T::zero() };
    let b = ProfileValue { value: T::zero(), d_x: T::zero(), d_t: T::zero(), d_th3: T::zero() };
    omega_from_profiles(p.r, theta3, &a, &b)
}

/// Closed-form linear coefficient of the characteristic polynomial, from
/// profile values.
#[inline]
pub fn c1_from_profiles<T: Real>(r: T, a: &ProfileValue<T>, b: &ProfileValue<T>) -> T {
    let r2 = r * r;
    let a2 = a.value * a.value;
    r2 * r2 * a2 * (a.d_x * a.d_x + a.d_t * a.d_t) + r2 * b.d_x * b.d_x * (a2 + a.d_th3 * a.d_th3)
}

/// Closed-form `c1` at a domain point. Strictly positive everywhere is
/// exactly maximal nondegeneracy of the form.
pub fn linear_coeff_c1<T: Real>(p: &PlugParams<T>, q: &PlugPoint<T>) -> Result<T> {
    let a = profile_a(p, q.theta3, q.x, q.t)?;
    let b = profile_b(p, q.x, q.t)?;
    Ok(c1_from_profiles(p.r, &a, &b))
}

/// Determinant of the principal 4x4 minor of `w` obtained by deleting row and
/// column `skip`, by cofactor expansion. Deliberately the textbook route,
/// sharing no algebra with the closed form or the Pfaffians.
fn principal_minor_det<T: Real>(w: &SkewForm5<T>, skip: usize) -> T {
    let idx: Vec<usize> = (0..5).filter(|&k| k != skip).collect();
    let mut a = [[T::zero(); 4]; 4];
    for (i, &ri) in idx.iter().enumerate() {
        for (j, &cj) in idx.iter().enumerate() {
            a[i][j] = w.entry(ri, cj);
        }
    }
    let det3 = |a: &[[T; 4]; 4], rows: [usize; 3], cols: [usize; 3]| -> T {
        a[rows[0]][cols[0]] * (a[rows[1]][cols[1]] * a[rows[2]][cols[2]] - a[rows[1]][cols[2]] * a[rows[2]][cols[1]])
            - a[rows[0]][cols[1]]
                * (a[rows[1]][cols[0]] * a[rows[2]][cols[2]] - a[rows[1]][cols[2]] * a[rows[2]][cols[0]])
            + a[rows[0]][cols[2]]
                * (a[rows[1]][cols[0]] * a[rows[2]][cols[1]] - a[rows[1]][cols[1]] * a[rows[2]][cols[0]])
    };
    let rows = [1, 2, 3];
    let mut det = T::zero();
    let mut sign = T::one();
    for j in 0..4 {
        let cols: [usize; 3] = match j {
            0 => [1, 2, 3],
            1 => [0, 2, 3],
            2 => [0, 1, 3],
            _ => [0, 1, 2],
        };
        det = det + sign * a[0][j] * det3(&a, rows, cols);
        sign = -sign;
    }
    det
}

/// Brute-force `c1`: the lambda-coefficient of `det(lambda I - w)` is the sum
/// of the five principal 4x4 minors. Independent oracle for the closed form;
/// each minor is a squared Pfaffian, so the result is nonnegative for any
/// antisymmetric input.
pub fn charpoly_c1_oracle<T: Real>(w: &SkewForm5<T>) -> T {
    (0..5).map(|k| principal_minor_det(w, k)).fold(T::zero(), |acc, d| acc + d)
}

/// Pfaffian of the principal 4x4 block on rows/columns `[p, q, r, s]`.
#[inline]
pub fn pfaffian4<T: Real>(w: &SkewForm5<T>, idx: [usize; 4]) -> T {
    let [p, q, r, s] = idx;
    w.entry(p, q) * w.entry(r, s) - w.entry(p, r) * w.entry(q, s) + w.entry(p, s) * w.entry(q, r)
}

/// Pfaffian of the top `(theta1, theta2, theta3, x)` block. For the plug form
/// this equals `R^2 A A'_x`, the density of `omega ^ omega ^ dt` against the
/// coordinate volume (global sign +1 in this crate's conventions).
pub fn pfaffian_top_block<T: Real>(w: &SkewForm5<T>) -> T {
    pfaffian4(w, [0, 1, 2, 3])
}

/// Unnormalized kernel vector: `v_i = (-1)^i Pf(w with row/col i deleted)`.
/// For an antisymmetric matrix of corank one this spans the kernel exactly,
/// and `|v|^2 = c1`.
pub fn kernel_vector_raw<T: Real>(w: &SkewForm5<T>) -> [T; 5] {
    [
        pfaffian4(w, [1, 2, 3, 4]),
        -pfaffian4(w, [0, 2, 3, 4]),
        pfaffian4(w, [0, 1, 3, 4]),
        -pfaffian4(w, [0, 1, 2, 4]),
        pfaffian4(w, [0, 1, 2, 3]),
    ]
}

/// The same kernel vector expanded in closed form from the profiles:
///
/// ```text
/// v = ( -R B'_x (A cos + A'_th3 sin),
///       -R B'_x (A sin - A'_th3 cos),
///        0,
///       -R^2 A A'_t,
///        R^2 A A'_x )
/// ```
///
/// Algebraically identical to [`kernel_vector_raw`] of the assembled matrix
/// (tested against it), but the third component is a literal zero rather than
/// a cancellation of rounded products - `theta3` is a first integral of the
/// characteristic flow, and the flow integrator preserves it bitwise by
/// evaluating the field through this form.
pub fn kernel_vector_closed<T: Real>(r: T, theta3: T, a: &ProfileValue<T>, b: &ProfileValue<T>) -> [T; 5] {
    let (c, s) = (theta3.cos(), theta3.sin());
    let r2 = r * r;
    [
        -(r * b.d_x * (a.value * c + a.d_th3 * s)),
        -(r * b.d_x * (a.value * s - a.d_th3 * c)),
        T::zero(),
        -(r2 * a.value * a.d_t),
        r2 * a.value * a.d_x,
    ]
}

/// Profiles of the straight-line homotopy `A_tau = (1 - tau) A + tau (1 + x)`,
/// `B_tau = (1 - tau) B` from the plug form (`tau = 0`) to the product form
/// `d((1+x) eta)` (`tau = 1`).
pub fn homotopy_profiles<T: Real>(
    p: &PlugParams<T>,
    tau: T,
    q: &PlugPoint<T>,
) -> Result<(ProfileValue<T>, ProfileValue<T>)> {
    let a = profile_a(p, q.theta3, q.x, q.t)?;
    let b = profile_b(p, q.x, q.t)?;
    Ok(interpolate_profiles(tau, q.x, &a, &b))
}

/// Same interpolation on profiles already in hand, without re-checking the
/// domain. Used by finite-difference probes that step just outside the
/// closed slab, where the formulas remain smooth.
pub(crate) fn homotopy_profiles_unchecked<T: Real>(
    p: &PlugParams<T>,
    tau: T,
    theta3: T,
    x: T,
    t: T,
) -> (ProfileValue<T>, ProfileValue<T>) {
    let a = crate::profiles::profile_a_unchecked(p, theta3, x, t);
    let b = crate::profiles::profile_b_unchecked(p, x, t);
    interpolate_profiles(tau, x, &a, &b)
}

fn interpolate_profiles<T: Real>(
    tau: T,
    x: T,
    a: &ProfileValue<T>,
    b: &ProfileValue<T>,
) -> (ProfileValue<T>, ProfileValue<T>) {
    let om = T::one() - tau;
    (
        ProfileValue {
            value: om * a.value + tau * (T::one() + x),
            d_x: om * a.d_x + tau,
            d_t: om * a.d_t,
            d_th3: om * a.d_th3,
        },
        ProfileValue { value: om * b.value, d_x: om * b.d_x, d_t: om * b.d_t, d_th3: T::zero() },
    )
}

/// The homotopy form at stage `tau in [0, 1]`.
pub fn eval_homotopy_omega<T: Real>(p: &PlugParams<T>, tau: T, q: &PlugPoint<T>) -> Result<SkewForm5<T>> {
    let tf = tau.to_f64().unwrap();
    if !(0.0..=1.0).contains(&tf) {
        return Err(Error::InvalidParameter(format!("tau = {tf} outside [0, 1]")));
    }
    let (a, b) = homotopy_profiles(p, tau, q)?;
    Ok(omega_from_profiles(p.r, q.theta3, &a, &b))
}

/// Per-stage record of a nondegeneracy sweep.
#[derive(Debug, Clone, Serialize)]
pub struct TauSweepRecord {
    pub tau: f64,
    pub n_samples: usize,
    pub min_c1: f64,
    /// `(theta1, theta2, theta3, x, t)` where the minimum was attained.
    pub argmin: [f64; 5],
    /// Worst relative disagreement between the closed form and the
    /// principal-minor oracle over the spot-checked subset.
    pub oracle_max_rel_err: f64,
    pub pass: bool,
}

/// Nondegeneracy sweep over every homotopy stage requested.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub params_hash: String,
    pub seed: u64,
    pub records: Vec<TauSweepRecord>,
    pub pass: bool,
}

/// Sweeps `c1` of the homotopy form over quasi-random points for each `tau`,
/// recording the minimum, its location, and an oracle spot check.
///
/// The sample set is augmented with deterministic candidate extrema - the two
/// exact torus points and the two slab edges - so degeneracies sitting exactly
/// on measure-zero sets (the `c_B = 0` failure mode lives on the tori) are
/// witnessed by the minimum instead of being skipped over.
pub fn nondegeneracy_sweep<T: Real>(p: &PlugParams<T>, n_samples: usize, taus: &[f64], seed: u64) -> SweepReport {
    let mut records = Vec::with_capacity(taus.len());
    for &tf in taus {
        let tau = T::of(tf);
        let mut sampler = PointSampler::new(p, seed);
        let mut min_c1 = f64::INFINITY;
        let mut argmin = [0.0; 5];
        let mut oracle_err = 0.0f64;
        let mut probe = |q: &PlugPoint<T>, check_oracle: bool, err: &mut f64| {
            let (a, b) = homotopy_profiles(p, tau, q).expect("sample in domain");
            let c1 = c1_from_profiles(p.r, &a, &b).to_f64().unwrap();
            if c1 < min_c1 {
                min_c1 = c1;
                let arr = q.to_array();
                for (slot, v) in argmin.iter_mut().zip(arr) {
                    *slot = v.to_f64().unwrap();
                }
            }
            if check_oracle {
                let w = omega_from_profiles(p.r, q.theta3, &a, &b);
                let oracle = charpoly_c1_oracle(&w).to_f64().unwrap();
                *err = (*err).max((c1 - oracle).abs() / (1.0 + c1.abs()));
            }
        };
        for i in 0..n_samples {
            let q = sampler.next_point();
            // Full oracle coverage is the acceptance suite's job; the sweep
            // spot-checks a thin deterministic slice to catch drift cheaply.
            probe(&q, i % 97 == 0, &mut oracle_err);
        }
        for q in [
            p.torus_point(false, T::zero(), T::zero()),
            p.torus_point(true, T::zero(), T::zero()),
            PlugPoint::new(T::zero(), T::zero(), T::zero(), -p.eps, T::zero()),
            PlugPoint::new(T::zero(), T::zero(), T::zero(), p.eps, T::zero()),
        ] {
            probe(&q, true, &mut oracle_err);
        }
        records.push(TauSweepRecord {
            tau: tf,
            n_samples: n_samples + 4,
            min_c1,
            argmin,
            oracle_max_rel_err: oracle_err,
            pass: min_c1 > 0.0 && oracle_err <= C1_ORACLE_REL_TOL,
        });
    }
    SweepReport {
        params_hash: p.params_hash(),
        seed,
        pass: records.iter().all(|r| r.pass),
        records,
    }
}
