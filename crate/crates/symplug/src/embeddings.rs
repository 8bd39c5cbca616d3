//! The explicit embeddings that place the plug inside standard symplectic
//! models, and the numerical pullback checks that certify them.
//!
//! Three maps are composed here, all written in closed form:
//!
//! * `phi1` scales the hypersurface `{|p| = R}` radially through the slab
//!   coordinate: `(x, thetas) -> (theta1, theta2, (1+x) R cos theta3,
//!   (1+x) R sin theta3)`. It pulls the Liouville form
//!   `lambda = p1 d.theta1 + p2 d.theta2` back to `(1+x) eta`, hence `d.lambda`
//!   back to `rho = d((1+x) eta)`.
//! * `phi2` is the action-angle chart around a Clifford torus in `R^4`:
//!   `(x_j, y_j) = sqrt(2 (c_act + p_j)) (cos theta_j, sin theta_j)`. Since
//!   `r dr = dp`, it pulls `dx_j ^ dy_j` back to exactly `+ dp_j ^ d.theta_j`
//!   (see [`OMEGA4_VS_DLAMBDA_SIGN`]).
//! * `embed_f` is the graph-like self-map `(thetas, x, t) -> (B, thetas,
//!   A - 1, t)` of `R x P`, the identity beside the boundary.
//!
//! From these, `embed_j = (t, phi2 . phi1)` realizes the product-form
//! embedding into `R^5` and `embed_full_j = (B, embed_j(thetas, A - 1, t))`
//! the flattened embedding into `R^6` whose first coordinate stays within
//! `delta` of zero. Every claimed pullback identity is checked by
//! [`pullback_form`] with either closed-form or central-difference Jacobians,
//! and [`homotopy_isotopy_check`] walks the straight-line deformation between
//! the flattened and product embeddings.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{
    eval_homotopy_omega, eval_omega, eval_rho, homotopy_profiles_unchecked, nondegeneracy_sweep,
    CoVector5, SkewForm5,
};
use crate::params::{validate_params, PlugParams};
use crate::point::{wrap_angle, PlugPoint};
use crate::profiles::profiles_at;
use crate::report::{Check, CheckKind, PropertyTag, VerificationReport};
use crate::sample::{CollarSampler, PointSampler};
use crate::scalar::Real;
use crate::thresholds::{FD_STEP, PULLBACK_ANALYTIC_TOL, PULLBACK_COLLAR_TOL};

/// Global sign convention: the Clifford chart `phi2` pulls
/// `Omega_4 = dx_1 ^ dy_1 + dx_2 ^ dy_2` back to
/// `+ (dp_1 ^ d.theta_1 + dp_2 ^ d.theta_2)`. Every downstream identity is
/// stated, and tested, with this sign.
pub const OMEGA4_VS_DLAMBDA_SIGN: f64 = 1.0;

/// Cap on the number of points entered into the pairwise injectivity scan of
/// [`homotopy_isotopy_check`]; the scan is quadratic in this count.
const INJECTIVITY_CAP: usize = 256;

/// Number of boundary-collar points and of pullback spot-check points used
/// per deformation stage in [`homotopy_isotopy_check`].
const COLLAR_POINTS: usize = 64;
const PULLBACK_SUBSET: usize = 32;

/// A point of the cotangent chart `(theta1, theta2, p1, p2)` over the
/// two-torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CotangentPoint<T> {
    pub theta1: T,
    pub theta2: T,
    pub p1: T,
    pub p2: T,
}

impl<T: Real> CotangentPoint<T> {
    pub fn new(theta1: T, theta2: T, p1: T, p2: T) -> Self {
        CotangentPoint { theta1: wrap_angle(theta1), theta2: wrap_angle(theta2), p1, p2 }
    }
}

/// A point of one of the three ambient models. Coordinate order is
/// `(x1, y1, x2, y2)` in dimension 4, `(t, x1, y1, x2, y2)` in dimension 5,
/// and `(y, t, x1, y1, x2, y2)` in dimension 6.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AmbientPoint<T> {
    Dim4([T; 4]),
    Dim5([T; 5]),
    Dim6([T; 6]),
}

impl<T> AmbientPoint<T> {
    pub fn dim(&self) -> usize {
        match self {
            AmbientPoint::Dim4(_) => 4,
            AmbientPoint::Dim5(_) => 5,
            AmbientPoint::Dim6(_) => 6,
        }
    }

    pub fn coords(&self) -> &[T] {
        match self {
            AmbientPoint::Dim4(c) => c,
            AmbientPoint::Dim5(c) => c,
            AmbientPoint::Dim6(c) => c,
        }
    }
}

/// Which map a pullback check exercises. `FullJ` is the composite flattened
/// embedding (printed as `J`); `J` is the product-form embedding `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MapId {
    Phi1,
    Phi2,
    J,
    F,
    FullJ,
}

impl MapId {
    pub const ALL: [MapId; 5] = [MapId::Phi1, MapId::Phi2, MapId::J, MapId::F, MapId::FullJ];
}

impl fmt::Display for MapId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MapId::Phi1 => "phi1",
            MapId::Phi2 => "phi2",
            MapId::J => "j",
            MapId::F => "f",
            MapId::FullJ => "J",
        };
        f.write_str(s)
    }
}

impl FromStr for MapId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi1" => Ok(MapId::Phi1),
            "phi2" => Ok(MapId::Phi2),
            "j" => Ok(MapId::J),
            "f" => Ok(MapId::F),
            "J" => Ok(MapId::FullJ),
            other => Err(Error::InvalidParameter(format!(
                "unknown map id '{other}' (expected one of: phi1, phi2, j, f, J; j and J are case-sensitive)"
            ))),
        }
    }
}

/// How the Jacobian entering a pullback is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PullbackMode {
    Analytic,
    FiniteDifference,
}

impl fmt::Display for PullbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PullbackMode::Analytic => "analytic",
            PullbackMode::FiniteDifference => "finite-difference",
        })
    }
}

impl FromStr for PullbackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(PullbackMode::Analytic),
            "fd" | "finite-difference" => Ok(PullbackMode::FiniteDifference),
            other => Err(Error::InvalidParameter(format!(
                "unknown pullback mode '{other}' (expected analytic or fd)"
            ))),
        }
    }
}

/// Outcome of one pullback check: the pulled-back matrix, the prescribed
/// target, and their entrywise maximum difference. Both matrices live in the
/// plug coordinate container; maps whose natural chart has fewer than five
/// coordinates are zero-padded (see [`pullback_form`]).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PullbackResult<T> {
    pub computed: SkewForm5<T>,
    pub target: SkewForm5<T>,
    pub max_abs_diff: T,
}

/// Outcome of the one-form pullback check for `embed_f`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OneFormPullback<T> {
    pub computed: CoVector5<T>,
    pub target: CoVector5<T>,
    pub max_abs_diff: T,
}

// ---------------------------------------------------------------------------
// The maps themselves, on raw coordinate arrays. These are total smooth
// formulas; the public wrappers validate domains, the finite-difference
// probes deliberately step just outside them.
// ---------------------------------------------------------------------------

fn phi1_raw<T: Real>(p: &PlugParams<T>, th1: T, th2: T, th3: T, x: T) -> [T; 4] {
    let u = (T::one() + x) * p.r;
    [th1, th2, u * th3.cos(), u * th3.sin()]
}

fn phi2_raw<T: Real>(p: &PlugParams<T>, c: &[T; 4]) -> Result<[T; 4]> {
    let mut out = [T::zero(); 4];
    for j in 0..2 {
        let act = p.c_act + c[2 + j];
        if act.widen() <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "action c_act + p{} = {} is not positive; the Clifford chart needs c_act > (1 + eps) R",
                j + 1,
                act.widen()
            )));
        }
        let r = (T::of(2.0) * act).sqrt();
        out[2 * j] = r * c[j].cos();
        out[2 * j + 1] = r * c[j].sin();
    }
    Ok(out)
}

fn j_raw<T: Real>(p: &PlugParams<T>, y: &[T; 5]) -> Result<[T; 5]> {
    let z = phi2_raw(p, &phi1_raw(p, y[0], y[1], y[2], y[3]))?;
    Ok([y[4], z[0], z[1], z[2], z[3]])
}

/// The slab deformation `(thetas, A_s - 1, t)` shared by `f` and `J` at
/// deformation stage `s` (`s = 0` is the genuine map).
fn g_raw<T: Real>(p: &PlugParams<T>, s: T, y: &[T; 5]) -> [T; 5] {
    let (a, _) = homotopy_profiles_unchecked(p, s, y[2], y[3], y[4]);
    [y[0], y[1], y[2], a.value - T::one(), y[4]]
}

/// `f` in the `R x P` chart, coordinate order `(y, theta1, theta2, theta3,
/// x, t)`.
fn f_raw<T: Real>(p: &PlugParams<T>, s: T, y: &[T; 5]) -> [T; 6] {
    let (a, b) = homotopy_profiles_unchecked(p, s, y[2], y[3], y[4]);
    [b.value, y[0], y[1], y[2], a.value - T::one(), y[4]]
}

fn full_j_raw<T: Real>(p: &PlugParams<T>, s: T, y: &[T; 5]) -> Result<[T; 6]> {
    let (_, b) = homotopy_profiles_unchecked(p, s, y[2], y[3], y[4]);
    let img = j_raw(p, &g_raw(p, s, y))?;
    Ok([b.value, img[0], img[1], img[2], img[3], img[4]])
}

/// Radial scaling into the cotangent chart. The caller guarantees
/// `x` lies in the slab; the formula itself is total.
pub fn phi1<T: Real>(p: &PlugParams<T>, x: T, thetas: (T, T, T)) -> CotangentPoint<T> {
    let c = phi1_raw(p, thetas.0, thetas.1, thetas.2, x);
    CotangentPoint::new(c[0], c[1], c[2], c[3])
}

/// Action-angle chart onto a Clifford-torus neighborhood in `R^4`. Fails if
/// either action `c_act + p_j` is not positive.
pub fn phi2<T: Real>(p: &PlugParams<T>, c: &CotangentPoint<T>) -> Result<AmbientPoint<T>> {
    Ok(AmbientPoint::Dim4(phi2_raw(p, &[c.theta1, c.theta2, c.p1, c.p2])?))
}

/// The product-form embedding `q -> (t, phi2(phi1(x, thetas)))` into `R^5`.
/// Injective: `t`, the angles, and `1 + x` are all recoverable from the
/// image.
pub fn embed_j<T: Real>(p: &PlugParams<T>, q: &PlugPoint<T>) -> Result<AmbientPoint<T>> {
    profiles_at(p, q)?;
    Ok(AmbientPoint::Dim5(j_raw(p, &q.to_array())?))
}

/// The graph-like self-map `q -> (B, (thetas, A - 1, t))`. Returns the flat
/// coordinate `y = B(x, t)` together with the image point of the plug; equals
/// `(0, q)` on the boundary collar up to one rounding of `(1 + x) - 1`.
pub fn embed_f<T: Real>(p: &PlugParams<T>, q: &PlugPoint<T>) -> Result<(T, PlugPoint<T>)> {
    let (a, b) = profiles_at(p, q)?;
    let image = PlugPoint::new(q.theta1, q.theta2, q.theta3, a.value - T::one(), q.t);
    Ok((b.value, image))
}

/// The flattened embedding `q -> (B, embed_j(thetas, A - 1, t))` into `R^6`.
/// Its first coordinate is bounded by `|c_b| eps <= delta`.
pub fn embed_full_j<T: Real>(p: &PlugParams<T>, q: &PlugPoint<T>) -> Result<AmbientPoint<T>> {
    embed_full_j_homotopy(p, q, T::zero())
}

/// Stage `s` of the straight-line deformation of [`embed_full_j`]: the
/// profiles are replaced by `A_s = (1-s) A + s (1+x)`, `B_s = (1-s) B`.
/// Stage 0 is the flattened embedding; stage 1 is `(0, embed_j(q))`.
pub fn embed_full_j_homotopy<T: Real>(
    p: &PlugParams<T>,
    q: &PlugPoint<T>,
    s: T,
) -> Result<AmbientPoint<T>> {
    let sf = s.widen();
    if !(0.0..=1.0).contains(&sf) {
        return Err(Error::InvalidParameter(format!("deformation stage s = {sf} outside [0, 1]")));
    }
    profiles_at(p, q)?;
    Ok(AmbientPoint::Dim6(full_j_raw(p, s, &q.to_array())?))
}

// ---------------------------------------------------------------------------
// Jacobians.
// ---------------------------------------------------------------------------

/// `4 x 5` Jacobian of `phi1` with respect to `(theta1, theta2, theta3, x, t)`.
fn jac_phi1<T: Real>(p: &PlugParams<T>, th3: T, x: T) -> Vec<Vec<T>> {
    let u = (T::one() + x) * p.r;
    let (c3, s3) = (th3.cos(), th3.sin());
    let z = T::zero();
    let o = T::one();
    vec![
        vec![o, z, z, z, z],
        vec![z, o, z, z, z],
        vec![z, z, -u * s3, p.r * c3, z],
        vec![z, z, u * c3, p.r * s3, z],
    ]
}

/// `4 x 4` Jacobian of `phi2` with respect to `(theta1, theta2, p1, p2)`;
/// uses `d r_j / d p_j = 1 / r_j`.
fn jac_phi2<T: Real>(p: &PlugParams<T>, c: &[T; 4]) -> Result<Vec<Vec<T>>> {
    let img = phi2_raw(p, c)?;
    let z = T::zero();
    let mut rows = vec![vec![z; 4]; 4];
    for j in 0..2 {
        let rsq = T::of(2.0) * (p.c_act + c[2 + j]);
        let (xj, yj) = (img[2 * j], img[2 * j + 1]);
        rows[2 * j][j] = -yj;
        rows[2 * j][2 + j] = xj / rsq;
        rows[2 * j + 1][j] = xj;
        rows[2 * j + 1][2 + j] = yj / rsq;
    }
    Ok(rows)
}

/// Matrix product of gradient rows: `outer` is `M x K` over the intermediate
/// coordinates, `inner` is `K x N` over the domain.
fn compose<T: Real>(outer: &[Vec<T>], inner: &[Vec<T>]) -> Vec<Vec<T>> {
    let ncols = inner[0].len();
    outer
        .iter()
        .map(|orow| {
            (0..ncols)
                .map(|a| {
                    let mut acc = T::zero();
                    for (k, irow) in inner.iter().enumerate() {
                        acc = acc + orow[k] * irow[a];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// `5 x 5` Jacobian of `embed_j`.
fn jac_j<T: Real>(p: &PlugParams<T>, y: &[T; 5]) -> Result<Vec<Vec<T>>> {
    let c = phi1_raw(p, y[0], y[1], y[2], y[3]);
    let composed = compose(&jac_phi2(p, &c)?, &jac_phi1(p, y[2], y[3]));
    let z = T::zero();
    let mut rows = Vec::with_capacity(5);
    rows.push(vec![z, z, z, z, T::one()]);
    rows.extend(composed);
    Ok(rows)
}

/// `5 x 5` Jacobian of the slab deformation `g_raw`: the identity except in
/// the `x` row, which carries the gradient of `A_s`.
fn jac_g<T: Real>(p: &PlugParams<T>, s: T, y: &[T; 5]) -> Vec<Vec<T>> {
    let (a, _) = homotopy_profiles_unchecked(p, s, y[2], y[3], y[4]);
    let z = T::zero();
    let o = T::one();
    vec![
        vec![o, z, z, z, z],
        vec![z, o, z, z, z],
        vec![z, z, o, z, z],
        vec![z, z, a.d_th3, a.d_x, a.d_t],
        vec![z, z, z, z, o],
    ]
}

/// `6 x 5` Jacobian of `f` in the `(y, theta1, theta2, theta3, x, t)` chart.
fn jac_f<T: Real>(p: &PlugParams<T>, s: T, y: &[T; 5]) -> Vec<Vec<T>> {
    let (a, b) = homotopy_profiles_unchecked(p, s, y[2], y[3], y[4]);
    let z = T::zero();
    let o = T::one();
    vec![
        vec![z, z, z, b.d_x, b.d_t],
        vec![o, z, z, z, z],
        vec![z, o, z, z, z],
        vec![z, z, o, z, z],
        vec![z, z, a.d_th3, a.d_x, a.d_t],
        vec![z, z, z, z, o],
    ]
}

/// `6 x 5` Jacobian of the (possibly deformed) flattened embedding.
fn jac_full_j<T: Real>(p: &PlugParams<T>, s: T, y: &[T; 5]) -> Result<Vec<Vec<T>>> {
    let (_, b) = homotopy_profiles_unchecked(p, s, y[2], y[3], y[4]);
    let inner = g_raw(p, s, y);
    let composed = compose(&jac_j(p, &inner)?, &jac_g(p, s, y));
    let z = T::zero();
    let mut rows = Vec::with_capacity(6);
    rows.push(vec![z, z, z, b.d_x, b.d_t]);
    rows.extend(composed);
    Ok(rows)
}

/// Central-difference Jacobian with step [`FD_STEP`], `dim_out` rows over an
/// `NIN`-coordinate domain.
fn fd_rows<T: Real, const NIN: usize>(
    center: &[T; NIN],
    dim_out: usize,
    mut eval: impl FnMut(&[T; NIN]) -> Result<Vec<T>>,
) -> Result<Vec<Vec<T>>> {
    let h = T::of(FD_STEP);
    let two_h = h + h;
    let mut rows = vec![vec![T::zero(); NIN]; dim_out];
    for a in 0..NIN {
        let mut yp = *center;
        let mut ym = *center;
        yp[a] = yp[a] + h;
        ym[a] = ym[a] - h;
        let fp = eval(&yp)?;
        let fm = eval(&ym)?;
        for i in 0..dim_out {
            rows[i][a] = (fp[i] - fm[i]) / two_h;
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Pullbacks.
// ---------------------------------------------------------------------------

fn dlambda_entries<T: Real>() -> [(usize, usize, T); 2] {
    // d.lambda = dp1 ^ d.theta1 + dp2 ^ d.theta2 in the chart
    // (theta1, theta2, p1, p2), so the (theta_j, p_j) slots carry -1.
    [(0, 2, -T::one()), (1, 3, -T::one())]
}

fn omega4_entries<T: Real>() -> [(usize, usize, T); 2] {
    [(0, 1, T::one()), (2, 3, T::one())]
}

fn omega5_entries<T: Real>() -> [(usize, usize, T); 2] {
    [(1, 2, T::one()), (3, 4, T::one())]
}

fn omega6_entries<T: Real>() -> [(usize, usize, T); 3] {
    [(0, 1, T::one()), (2, 3, T::one()), (4, 5, T::one())]
}

/// The ambient form of the `R x P` model, `dy ^ dt + rho`, as sparse entries
/// in the chart `(y, theta1, theta2, theta3, x, t)`; `rho` is evaluated at
/// the image slab coordinate.
fn rxp_entries<T: Real>(p: &PlugParams<T>, theta3: T, x_img: T) -> Vec<(usize, usize, T)> {
    let rho = eval_rho(p, theta3, x_img);
    let mut entries = vec![(0, 5, T::one())];
    for i in 0..5 {
        for j in (i + 1)..5 {
            let v = rho.entry(i, j);
            if v.widen() != 0.0 {
                entries.push((i + 1, j + 1, v));
            }
        }
    }
    entries
}

/// Pulls a constant two-form (given by strict upper entries over the ambient
/// coordinates) back along gradient rows. The result lives in the first
/// `ndom` domain coordinates and is zero-padded into the 5x5 container.
fn pull_entries<T: Real>(
    rows: &[Vec<T>],
    entries: &[(usize, usize, T)],
    ndom: usize,
) -> SkewForm5<T> {
    let mut upper = Vec::new();
    for a in 0..ndom {
        for b in (a + 1)..ndom {
            let mut acc = T::zero();
            for &(i, j, v) in entries {
                acc = acc + v * (rows[i][a] * rows[j][b] - rows[i][b] * rows[j][a]);
            }
            upper.push((a, b, acc));
        }
    }
    SkewForm5::from_upper(&upper)
}

/// Pulls the ambient form of `map` back at `q` and compares against the
/// prescribed target.
///
/// Chart conventions: `phi1`, `j`, `f`, and `J` are differentiated in the
/// plug coordinates, targets `rho` (for the first two, which do not see the
/// bumps) and `omega` (for the last two). `phi2` is checked in its own
/// cotangent chart `(theta1, theta2, p1, p2)` at the point `phi1(q)`; its
/// 4x4 matrices occupy the leading block of the 5x5 container and the target
/// is the canonical `d.lambda` matrix.
pub fn pullback_form<T: Real>(
    map: MapId,
    p: &PlugParams<T>,
    q: &PlugPoint<T>,
    mode: PullbackMode,
) -> Result<PullbackResult<T>> {
    let (a, _) = profiles_at(p, q)?;
    let y = q.to_array();
    let fd = matches!(mode, PullbackMode::FiniteDifference);
    let (computed, target) = match map {
        MapId::Phi1 => {
            let rows = if fd {
                fd_rows(&y, 4, |w: &[T; 5]| Ok(phi1_raw(p, w[0], w[1], w[2], w[3]).to_vec()))?
            } else {
                jac_phi1(p, q.theta3, q.x)
            };
            (pull_entries(&rows, &dlambda_entries(), 5), eval_rho(p, q.theta3, q.x))
        }
        MapId::Phi2 => {
            let c = phi1_raw(p, q.theta1, q.theta2, q.theta3, q.x);
            let rows = if fd {
                fd_rows(&c, 4, |w: &[T; 4]| Ok(phi2_raw(p, w)?.to_vec()))?
            } else {
                jac_phi2(p, &c)?
            };
            (
                pull_entries(&rows, &omega4_entries(), 4),
                SkewForm5::from_upper(&dlambda_entries()),
            )
        }
        MapId::J => {
            let rows = if fd {
                fd_rows(&y, 5, |w: &[T; 5]| Ok(j_raw(p, w)?.to_vec()))?
            } else {
                jac_j(p, &y)?
            };
            (pull_entries(&rows, &omega5_entries(), 5), eval_rho(p, q.theta3, q.x))
        }
        MapId::F => {
            let rows = if fd {
                fd_rows(&y, 6, |w: &[T; 5]| Ok(f_raw(p, T::zero(), w).to_vec()))?
            } else {
                jac_f(p, T::zero(), &y)
            };
            let entries = rxp_entries(p, q.theta3, a.value - T::one());
            (pull_entries(&rows, &entries, 5), eval_omega(p, q)?)
        }
        MapId::FullJ => {
            let rows = if fd {
                fd_rows(&y, 6, |w: &[T; 5]| Ok(full_j_raw(p, T::zero(), w)?.to_vec()))?
            } else {
                jac_full_j(p, T::zero(), &y)?
            };
            (pull_entries(&rows, &omega6_entries(), 5), eval_omega(p, q)?)
        }
    };
    let max_abs_diff = computed.max_abs_diff(&target);
    Ok(PullbackResult { computed, target, max_abs_diff })
}

/// Pulls the primitive one-form `alpha = y dt + (1 + x) eta` of the
/// `R x P` model back through `embed_f` and compares with `A eta + B dt`,
/// the primitive whose differential is the plug form.
pub fn pullback_one_form_f<T: Real>(
    p: &PlugParams<T>,
    q: &PlugPoint<T>,
) -> Result<OneFormPullback<T>> {
    let (a, b) = profiles_at(p, q)?;
    let rows = jac_f(p, T::zero(), &q.to_array());
    let (c3, s3) = (q.theta3.cos(), q.theta3.sin());
    let one_plus_img = T::one() + (a.value - T::one());
    let z = T::zero();
    // alpha at the image, in the chart (y, theta1, theta2, theta3, x, t).
    let alpha = [z, one_plus_img * p.r * c3, one_plus_img * p.r * s3, z, z, b.value];
    let mut comp = [T::zero(); 5];
    for (i, ai) in alpha.iter().enumerate() {
        for (slot, c) in comp.iter_mut().enumerate() {
            *c = *c + *ai * rows[i][slot];
        }
    }
    let computed = CoVector5(comp);
    let target = CoVector5([p.r * a.value * c3, p.r * a.value * s3, z, z, b.value]);
    Ok(OneFormPullback { computed, target, max_abs_diff: computed.max_abs_diff(&target) })
}

// ---------------------------------------------------------------------------
// The isotopy report.
// ---------------------------------------------------------------------------

/// Walks the straight-line deformation between the flattened embedding
/// (`s = 0`) and the product-form embedding (`s = 1`) and reports:
///
/// * every interpolated two-form stays maximally nondegenerate (delegated to
///   the sweep over the same stages);
/// * at each stage the deformed embedding is injective on a capped sample
///   set, agrees with `(0, embed_j)` on the boundary collar, and keeps its
///   flat coordinate within `delta`;
/// * the product-form embedding pulls the ambient form back to the product
///   form (not the plug form — see the negative control in the tests);
/// * each deformed embedding pulls the six-dimensional ambient form back to
///   the matching interpolated two-form.
///
/// The evidence is sampled at `n_taus` stages and finitely many points; it
/// is not a continuous certificate, and the report says so.
pub fn homotopy_isotopy_check<T: Real>(
    p: &PlugParams<T>,
    n_samples: usize,
    n_taus: usize,
    seed: u64,
) -> VerificationReport {
    let validation = validate_params(p);
    if !validation.hard_pass() {
        return VerificationReport::refusal(PropertyTag::Isotopy, &validation, seed);
    }
    let mut report = VerificationReport::new(PropertyTag::Isotopy, validation.params_hash.clone(), seed);
    let n_taus = n_taus.max(2);
    let taus: Vec<f64> = (0..n_taus).map(|i| i as f64 / (n_taus - 1) as f64).collect();

    let sweep = nondegeneracy_sweep(p, n_samples, &taus, seed);
    let min_c1 = sweep.records.iter().map(|r| r.min_c1).fold(f64::INFINITY, f64::min);

    let m = n_samples.min(INJECTIVITY_CAP);
    let mut sampler = PointSampler::new(p, seed);
    let interior: Vec<PlugPoint<T>> = (0..m).map(|_| sampler.next_point()).collect();
    let mut csampler = CollarSampler::new(p, seed ^ 0x5851_f42d_4c95_7f2d);
    let collar: Vec<PlugPoint<T>> = (0..COLLAR_POINTS).map(|_| csampler.next_point()).collect();

    let mut min_pair = f64::INFINITY;
    let mut worst_collar = 0.0f64;
    let mut max_y = 0.0f64;
    let mut worst_stage_pull = 0.0f64;
    let mut worst_j_pull = 0.0f64;
    let mut undefined = 0usize;

    for &tf in &taus {
        let s = T::of(tf);
        let mut images: Vec<[T; 6]> = Vec::with_capacity(m);
        for q in &interior {
            match full_j_raw(p, s, &q.to_array()) {
                Ok(img) => {
                    max_y = max_y.max(img[0].widen().abs());
                    images.push(img);
                }
                Err(_) => undefined += 1,
            }
        }
        for i in 0..images.len() {
            for k in (i + 1)..images.len() {
                let mut d2 = T::zero();
                for c in 0..6 {
                    let d = images[i][c] - images[k][c];
                    d2 = d2 + d * d;
                }
                min_pair = min_pair.min(d2.sqrt().widen());
            }
        }
        for qc in &collar {
            let yc = qc.to_array();
            match (full_j_raw(p, s, &yc), j_raw(p, &yc)) {
                (Ok(full), Ok(base)) => {
                    let mut d = full[0].widen().abs();
                    for c in 0..5 {
                        d = d.max((full[c + 1] - base[c]).widen().abs());
                    }
                    worst_collar = worst_collar.max(d);
                }
                _ => undefined += 1,
            }
        }
        for q in interior.iter().take(PULLBACK_SUBSET) {
            let pulled = jac_full_j(p, s, &q.to_array())
                .map(|rows| pull_entries(&rows, &omega6_entries(), 5));
            match (pulled, eval_homotopy_omega(p, s, q)) {
                (Ok(computed), Ok(target)) => {
                    worst_stage_pull = worst_stage_pull.max(computed.max_abs_diff(&target).widen());
                }
                _ => undefined += 1,
            }
        }
    }

    for q in interior.iter().take(PULLBACK_SUBSET) {
        match pullback_form(MapId::J, p, q, PullbackMode::Analytic) {
            Ok(r) => worst_j_pull = worst_j_pull.max(r.max_abs_diff.widen()),
            Err(_) => undefined += 1,
        }
    }

    report.push_check(Check::flag("all_stages_nondegenerate", sweep.pass));
    report.push_check(Check::flag("all_map_evaluations_defined", undefined == 0));
    report.push_check(Check::new(
        "min_pairwise_image_distance",
        min_pair,
        0.0,
        CheckKind::StrictLowerBound,
    ));
    report.push_check(Check::new(
        "collar_agreement_worst",
        worst_collar,
        PULLBACK_COLLAR_TOL,
        CheckKind::UpperBound,
    ));
    report.push_check(Check::new("max_y_coordinate", max_y, p.delta.widen(), CheckKind::UpperBound));
    report.push_check(Check::new(
        "j_pullback_matches_omega1",
        worst_j_pull,
        PULLBACK_ANALYTIC_TOL,
        CheckKind::UpperBound,
    ));
    report.push_check(Check::new(
        "deformed_pullback_matches_homotopy_form",
        worst_stage_pull,
        PULLBACK_ANALYTIC_TOL,
        CheckKind::UpperBound,
    ));

    report.push_metric("n_stages", n_taus as f64);
    report.push_metric("n_sweep_samples", n_samples as f64);
    report.push_metric("n_injectivity_points", m as f64);
    report.push_metric("n_collar_points", COLLAR_POINTS as f64);
    report.push_metric("min_c1_over_stages", min_c1);
    report.push_note(format!(
        "isotopy evidence is sampled at {n_taus} stages and finitely many points; \
         it is not a continuous certificate"
    ));
    if n_samples > INJECTIVITY_CAP {
        report.push_note(format!(
            "pairwise injectivity scan capped at {INJECTIVITY_CAP} of the {n_samples} sweep samples"
        ));
    }
    report
}
