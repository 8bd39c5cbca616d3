//! Plug parameters: geometry of the slab, bump half-widths, the trapping
//! slope, and the symplectic padding constants, plus the flat key-value
//! config format the CLI exchanges.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::point::{wrap_angle, PlugPoint};
use crate::scalar::Real;

/// Full parameter set for one plug.
///
/// `theta_tilde` is the angle whose tangent is the trapping slope; it is
/// configured and serialized through its *tangent* (`theta_tilde_tan`) so the
/// irrational target is stated directly. The default slope is the golden
/// ratio, the badly-approximable choice that maximizes the closure gap at a
/// given horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlugParams<T> {
    /// Radius of the momentum circle defining the trapping torus; scales eta.
    pub r: T,
    /// Slab half-width: x ranges over [-eps, eps].
    pub eps: T,
    /// Angle on the third circle singling out the trapping direction.
    pub theta_tilde: T,
    /// Half-width of the x-bump (must sit strictly inside the slab).
    pub a_x: T,
    /// Half-width of the two t-bumps centered at t = -1/2 and t = 1/2.
    pub a_t: T,
    /// Half-width of the periodic theta3-bump around theta_tilde.
    pub a_th: T,
    /// Amplitude of the off-diagonal profile B; the x^t block on the tori.
    pub c_b: T,
    /// Thickness bound for the slab coordinate of the 6D embedding.
    pub delta: T,
    /// Action offset keeping both action coordinates positive.
    pub c_act: T,
}

/// Golden ratio, the default trapping slope.
pub fn golden_ratio<T: Real>() -> T {
    (T::one() + T::of(5.0).sqrt()) / T::of(2.0)
}

impl<T: Real> Default for PlugParams<T> {
    fn default() -> Self {
        Self::from_tan(
            T::one(),
            T::of(0.25),
            golden_ratio(),
            T::of(0.1),
            T::of(0.1),
            T::of(0.5),
            T::of(0.05),
            T::of(0.1),
            T::of(2.0),
        )
    }
}

impl<T: Real> PlugParams<T> {
    /// Builds a parameter set from the trapping slope `tan(theta_tilde)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_tan(r: T, eps: T, theta_tilde_tan: T, a_x: T, a_t: T, a_th: T, c_b: T, delta: T, c_act: T) -> Self {
        Self {
            r,
            eps,
            theta_tilde: wrap_angle(theta_tilde_tan.atan()),
            a_x,
            a_t,
            a_th,
            c_b,
            delta,
            c_act,
        }
    }

    pub fn theta_tilde_tan(&self) -> T {
        self.theta_tilde.tan()
    }

    /// The same parameters with the trapping slope replaced (rational slopes
    /// serve as negative controls for the aperiodicity checks).
    pub fn with_tan(&self, theta_tilde_tan: T) -> Self {
        Self { theta_tilde: wrap_angle(theta_tilde_tan.atan()), ..*self }
    }

    /// The two trapping tori sit at `(theta3, x, t) = (theta_tilde, 0, s/2)`,
    /// `s = -1` for the lower one, `+1` for the upper one.
    pub fn torus_point(&self, upper: bool, theta1: T, theta2: T) -> PlugPoint<T> {
        let half = T::of(0.5);
        PlugPoint::new(theta1, theta2, self.theta_tilde, T::zero(), if upper { half } else { -half })
    }

    /// Unit direction of the trapping flow, `(cos, sin, 0, 0, 0)` at
    /// `theta_tilde`, in the fixed coordinate order.
    pub fn torus_direction(&self) -> [T; 5] {
        [self.theta_tilde.cos(), self.theta_tilde.sin(), T::zero(), T::zero(), T::zero()]
    }

    /// The same parameters at `f64`, the scalar all reports are stated in.
    pub fn to_f64(&self) -> PlugParams<f64> {
        PlugParams {
            r: self.r.to_f64().unwrap(),
            eps: self.eps.to_f64().unwrap(),
            theta_tilde: self.theta_tilde.to_f64().unwrap(),
            a_x: self.a_x.to_f64().unwrap(),
            a_t: self.a_t.to_f64().unwrap(),
            a_th: self.a_th.to_f64().unwrap(),
            c_b: self.c_b.to_f64().unwrap(),
            delta: self.delta.to_f64().unwrap(),
            c_act: self.c_act.to_f64().unwrap(),
        }
    }

    /// Canonical flat key-value serialization (the config file format).
    pub fn to_config_string(&self) -> String {
        let p = self.to_f64();
        let mut s = String::new();
        for (k, v) in [
            ("R", p.r),
            ("eps", p.eps),
            ("theta_tilde_tan", p.theta_tilde.tan()),
            ("a_x", p.a_x),
            ("a_t", p.a_t),
            ("a_th", p.a_th),
            ("c_B", p.c_b),
            ("delta", p.delta),
            ("c_act", p.c_act),
        ] {
            // `{:?}` prints the shortest representation that round-trips.
            writeln!(s, "{k} = {v:?}").unwrap();
        }
        s
    }

    /// FNV-1a hash of the canonical serialization; embedded in every report so
    /// results are traceable to the exact parameter set that produced them.
    pub fn params_hash(&self) -> String {
        fnv1a_hex(self.to_config_string().as_bytes())
    }
}

/// 64-bit FNV-1a, hex-encoded. Deterministic across runs and platforms.
pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Key-value lines accepted by [`parse_config`], shared by plug parameters and
/// scene settings. `#` starts a comment; blank lines are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1)))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("line {}: `{}` is not a number", lineno + 1, v.trim())))?;
        out.push((k.trim().to_string(), value));
    }
    Ok(out)
}

/// Scene-level settings that may ride along in the same config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    /// Circumference of the ambient flow-box circle (must exceed the plug
    /// length 2).
    pub period: f64,
    /// Number of control entries the orbit-destruction demo traces.
    pub n_controls: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { period: 4.0, n_controls: 50 }
    }
}

/// Parses a config file into plug parameters plus scene settings. Unknown keys
/// are rejected so typos cannot silently fall back to defaults.
pub fn parse_config<T: Real>(text: &str) -> Result<(PlugParams<T>, SceneConfig)> {
    let defaults = PlugParams::<f64>::default();
    let (mut r, mut eps, mut tan, mut a_x, mut a_t, mut a_th, mut c_b, mut delta, mut c_act) = (
        defaults.r,
        defaults.eps,
        defaults.theta_tilde.tan(),
        defaults.a_x,
        defaults.a_t,
        defaults.a_th,
        defaults.c_b,
        defaults.delta,
        defaults.c_act,
    );
    let mut scene = SceneConfig::default();
    for (k, v) in parse_key_values(text)? {
        match k.as_str() {
            "R" => r = v,
            "eps" => eps = v,
            "theta_tilde_tan" => tan = v,
            "a_x" => a_x = v,
            "a_t" => a_t = v,
            "a_th" => a_th = v,
            "c_B" => c_b = v,
            "delta" => delta = v,
            "c_act" => c_act = v,
            "L" => scene.period = v,
            "n_controls" => scene.n_controls = v as usize,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
    }
    Ok((
        PlugParams::from_tan(
            T::of(r),
            T::of(eps),
            T::of(tan),
            T::of(a_x),
            T::of(a_t),
            T::of(a_th),
            T::of(c_b),
            T::of(delta),
            T::of(c_act),
        ),
        scene,
    ))
}

/// One named constraint verdict inside a [`ValidationReport`].
#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    /// `true` when violating the constraint makes evaluating the form or
    /// integrating the flow unsound (checkers refuse to run); `false` for
    /// diagnostic expectations (a zero twist constant, an embedding margin)
    /// whose consequences the checkers are built to catch and report.
    pub hard: bool,
}

/// Outcome of `validate_params`: every violated constraint by name, never a
/// panic or an early abort.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pass: bool,
    pub items: Vec<CheckItem>,
    pub params_hash: String,
}

impl ValidationReport {
    /// Whether every *hard* precondition holds (see [`CheckItem::hard`]).
    pub fn hard_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass || !i.hard)
    }
}

/// Checks every documented parameter constraint and reports all violations.
pub fn validate_params<T: Real>(p: &PlugParams<T>) -> ValidationReport {
    let f = p.to_f64();
    let pi = core::f64::consts::PI;
    let mut items = Vec::new();
    let mut check = |name: &'static str, pass: bool, hard: bool, detail: String| {
        items.push(CheckItem { name, pass, detail, hard });
    };

    check("r_positive", f.r > 0.0, true, format!("R = {}", f.r));
    check("eps_positive", f.eps > 0.0, true, format!("eps = {}", f.eps));
    check(
        "eps_at_most_half",
        f.eps <= 0.5,
        true,
        format!("eps = {} (A >= 1 - eps needs eps <= 1/2)", f.eps),
    );
    check(
        "a_x_inside_slab",
        f.a_x > 0.0 && f.a_x < f.eps,
        true,
        format!("a_x = {}, eps = {}", f.a_x, f.eps),
    );
    check(
        "a_t_quarter",
        f.a_t > 0.0 && f.a_t < 0.25,
        true,
        format!("a_t = {} (t-bumps must clear t = 0 and the faces)", f.a_t),
    );
    check(
        "a_th_inside_circle",
        f.a_th > 0.0 && f.a_th < pi,
        true,
        format!("a_th = {}", f.a_th),
    );
    check("c_b_nonzero", f.c_b != 0.0, false, format!("c_B = {}", f.c_b));
    check("delta_positive", f.delta > 0.0, false, format!("delta = {}", f.delta));
    check(
        "c_b_within_delta",
        f.c_b.abs() <= f.delta,
        false,
        format!("|c_B| = {}, delta = {}", f.c_b.abs(), f.delta),
    );
    check(
        "c_act_clears_slab",
        f.c_act > (1.0 + f.eps) * f.r,
        false,
        format!("c_act = {}, (1+eps) R = {}", f.c_act, (1.0 + f.eps) * f.r),
    );

    ValidationReport {
        pass: items.iter().all(|i| i.pass),
        items,
        params_hash: p.params_hash(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass_validation() {
        let report = validate_params(&PlugParams::<f64>::default());
        assert!(report.pass, "{:?}", report.items);
    }

    #[test]
    fn default_slope_is_golden_and_angle_wrapped() {
        let p = PlugParams::<f64>::default();
        let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
        assert!((p.theta_tilde_tan() - phi).abs() < 1e-12);
        assert!(p.theta_tilde > 0.0 && p.theta_tilde < core::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn wide_slab_is_flagged_by_name() {
        let p = PlugParams { eps: 0.6, ..PlugParams::<f64>::default() };
        let report = validate_params(&p);
        assert!(!report.pass);
        let item = report.items.iter().find(|i| i.name == "eps_at_most_half").unwrap();
        assert!(!item.pass);
        // a_x = 0.1 < 0.6 still holds, so only the eps constraint trips.
        assert!(report.items.iter().filter(|i| !i.pass).count() == 1);
    }

    #[test]
    fn small_action_offset_is_flagged() {
        let p = PlugParams { c_act: 1.2, ..PlugParams::<f64>::default() };
        let report = validate_params(&p);
        let item = report.items.iter().find(|i| i.name == "c_act_clears_slab").unwrap();
        assert!(!item.pass, "c_act = 1.2 <= 1.25 must fail");
    }

    #[test]
    fn x_bump_wider_than_slab_is_flagged() {
        let p = PlugParams { a_x: 0.3, ..PlugParams::<f64>::default() };
        assert!(!validate_params(&p).pass);
    }

    #[test]
    fn config_roundtrip_is_exact() {
        let p = PlugParams::<f64>::default();
        let text = p.to_config_string();
        let (q, scene) = parse_config::<f64>(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(scene, SceneConfig::default());
        assert_eq!(p.params_hash(), q.params_hash());
    }

    #[test]
    fn config_accepts_comments_and_scene_keys() {
        let text = "# plug geometry\nR = 2.0\ntheta_tilde_tan = 1.0 # rational control\nL = 6.0\nn_controls = 10\n";
        let (p, scene) = parse_config::<f64>(text).unwrap();
        assert_eq!(p.r, 2.0);
        assert!((p.theta_tilde - core::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(scene.period, 6.0);
        assert_eq!(scene.n_controls, 10);
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_numbers() {
        assert!(matches!(parse_config::<f64>("Rr = 1.0\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config::<f64>("R = one\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config::<f64>("R 1.0\n"), Err(Error::Config(_))));
    }

    #[test]
    fn params_hash_distinguishes_parameter_sets() {
        let a = PlugParams::<f64>::default();
        let b = PlugParams { c_b: 0.06, ..a };
        assert_ne!(a.params_hash(), b.params_hash());
        assert_eq!(a.params_hash(), PlugParams::<f64>::default().params_hash());
    }

    #[test]
    fn torus_points_sit_at_the_documented_coordinates() {
        let p = PlugParams::<f64>::default();
        let lower = p.torus_point(false, 0.0, 0.0);
        assert_eq!(lower.t, -0.5);
        assert_eq!(lower.x, 0.0);
        assert_eq!(lower.theta3, p.theta_tilde);
        assert_eq!(p.torus_point(true, 0.0, 0.0).t, 0.5);
    }
}
