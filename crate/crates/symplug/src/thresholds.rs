//! Every tolerance and threshold the verifier and acceptance gates use, in one
//! place, with the reasoning that sizes each one.
//!
//! Conventions: `*_TOL` bounds an error that must stay small, `*_FLOOR` bounds
//! a quantity that must stay large, radii/dwells are in the natural units of
//! the quantity they gate (arclength for dwells, product-metric distance for
//! radii). All values are calibrated for `f64`.

/// Agreement between the closed-form linear characteristic coefficient and the
/// principal-minor oracle, relative to `1 + |c1|`. Both routes are a few dozen
/// flops on O(1)-scale entries, so machine epsilon times a small factor; 1e-9
/// leaves three orders of headroom.
pub const C1_ORACLE_REL_TOL: f64 = 1e-9;

/// Kernel residual bound: `|m v|_inf <= KERNEL_RESIDUAL_TOL * |m|` for a unit
/// kernel vector `v`. The sub-Pfaffian solve is exact algebra, so the residual
/// is rounding noise amplified by at most `|m|^2 / sqrt(c1)`, which the
/// degeneracy gate below caps at 1e4.
pub const KERNEL_RESIDUAL_TOL: f64 = 1e-10;

/// A form counts as degenerate when `sqrt(c1) <= ratio * |m|_F^2`. At the
/// default parameters the worst in-domain ratio is ~2e-2 (on the tori, where
/// c1 = R^2 c_B^2); 1e-4 separates that cleanly from the c_B = 0 failure mode
/// while keeping the residual guarantee above.
pub const KERNEL_DEGENERACY_RATIO: f64 = 1e-4;

/// Orientation rule (i): the t-component sign is trusted when it exceeds this.
pub const KERNEL_T_SIGN_MIN: f64 = 1e-8;

/// Boundary-collar kernel alignment: angle between the characteristic line and
/// the t-axis near the boundary. The collar form is exactly `dx^eta +
/// (1+x) d(eta)`, whose kernel is exactly the t-axis, so this is pure rounding.
pub const P1_ANGLE_TOL: f64 = 1e-8;

/// Radius of the torus neighborhoods used for trapping verdicts and the
/// re-entry check of the trapped-entry search.
pub const TRAP_RADIUS: f64 = 1e-2;

/// Arclength a trajectory must dwell inside a torus neighborhood, with
/// non-increasing distance, before it is declared trapped. Passing orbits
/// break monotonicity at closest approach well before accumulating this much.
pub const TRAP_DWELL: f64 = 100.0;

/// Slack allowed in the "non-increasing distance" envelope checks; covers
/// rounding in the distance evaluation, not real growth.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Exit-versus-entry match for transiting characteristics, in the periodic
/// metric on `(theta1, theta2, theta3, x)`. The reversal symmetry makes the
/// true mismatch zero; the budget is integrator drift at `P3_TOL` over a
/// transit of a few units of arclength.
pub const P3_MATCH_TOL: f64 = 1e-5;

/// Integrator tolerance at which transit matching is verified.
pub const P3_TOL: f64 = 1e-10;

/// Fraction of transits allowed to be inconclusive (horizon reached without
/// exit) before the transit check fails.
pub const P3_INCONCLUSIVE_FRACTION: f64 = 0.05;

/// Reference arclength for transit-match tolerance scaling: the allowance is
/// `P3_MATCH_TOL * max(1, arclength / this)`, since integrator drift grows at
/// most linearly in arclength at fixed step tolerance. A straight transit has
/// arclength 2; the reference leaves plain transits at the unscaled budget.
pub const P3_ARC_REF: f64 = 4.0;

/// One-sided bound for the oriented kernel's t-component: `v_t >= -this`
/// everywhere. The raw kernel formula gives `v_t = R^2 A A'_x >= 0` exactly;
/// the allowance is for normalization rounding.
pub const P4_VT_NEG_TOL: f64 = 1e-9;

/// Angle between the kernel on a trapping torus and the linear-flow direction
/// `(cos(theta3~), sin(theta3~), 0, 0, 0)`.
pub const P4_TORUS_ANGLE_TOL: f64 = 1e-8;

/// Closure gap every sampled trajectory must keep at the verification horizon.
/// For the golden-ratio slope the best near-return within arclength 1e3 is
/// ~2.7e-2 (continued-fraction denominator 55), a margin of 27x.
pub const CLOSURE_GAP_FLOOR: f64 = 1e-3;

/// Gap the rational-slope control must *fail* to keep: its orbit closes after
/// one winding, so the measured gap is integrator-plus-interpolation noise.
pub const CLOSURE_GAP_CONTROL_CEIL: f64 = 1e-6;

/// Velocity alignment (unit dot product) below which a sample pair is not a
/// near-return candidate.
pub const CLOSURE_ALIGNMENT_MIN: f64 = 0.99;

/// Line-level equivariance of the kernel under the reversal involution.
pub const SYMMETRY_ANGLE_TOL: f64 = 1e-6;

/// Pullback identities, analytic Jacobians: pure algebra, rounding only.
pub const PULLBACK_ANALYTIC_TOL: f64 = 1e-10;

/// Pullback identities via central finite differences with step `FD_STEP`:
/// truncation is `O(h^2 * third derivative)`, roundoff `O(eps / h)`. Maps
/// whose third derivatives involve the bump profiles pick up a factor of
/// order `a^-3 ~ 1e3`, so 1e-6 leaves margin over the ~1e-8 balance point.
pub const PULLBACK_FD_TOL: f64 = 1e-6;

/// Finite-difference pullback tolerance for the maps built from
/// trigonometric and radial factors only (no bump profiles): their third
/// derivatives are O(1), so the step balance point itself is attainable.
pub const PULLBACK_FD_TRIG_TOL: f64 = 1e-8;

/// Central-difference step for numerical Jacobians.
pub const FD_STEP: f64 = 1e-5;

/// The flow-box embedding pulls the ambient form back to exactly the boundary
/// form on the collar; entrywise agreement there is exact up to rounding.
pub const PULLBACK_COLLAR_TOL: f64 = 1e-12;

/// Pointwise agreement of the top-block Pfaffian with `R^2 A A'_x` (the
/// volume-pairing identity), relative to `1 + |value|`.
pub const PFAFFIAN_IDENTITY_TOL: f64 = 1e-9;

/// Maximum interface mismatch when a composite trajectory hands over between
/// the ambient flow box and a plug face before it is a consistency error.
pub const SCENE_INTERFACE_TOL: f64 = 1e-8;

/// Reclose gate for composite trajectories after one period.
pub const RECLOSE_GAP: f64 = 1e-4;

/// Minimum fraction of demo control entries that must reclose; the rest may
/// be inconclusive (long near-trap dwell) up to the cap below, but never
/// open or trapped.
pub const DEMO_RECLOSE_FRACTION: f64 = 0.9;

/// Cap on the fraction of demo control entries that may exhaust their
/// horizon without a verdict. Looser than the transit-matching cap because
/// demo controls may be drawn deliberately close to the trapped entry.
pub const DEMO_INCONCLUSIVE_FRACTION: f64 = 0.1;

/// Event location: `|t -+ 1|` of an exit point after bisecting the dense
/// output, and the face coordinate error tolerated when reporting exits.
pub const EVENT_LOCATION_TOL: f64 = 1e-12;

/// Trapped-entry search: offset from the torus along the probed divergence
/// direction, and the distance-growth probe arclength.
pub const TRAP_SEARCH_OFFSET: f64 = 1e-3;
pub const TRAP_SEARCH_PROBE_ARC: f64 = 2.0;

/// Forward-integration budget used to confirm a candidate trapped entry: the
/// capture detector needs [`TRAP_DWELL`] of dwell plus the approach arc
/// (under 2 for entries the search produces), with a wide margin.
pub const TRAP_VERIFY_HORIZON: f64 = 400.0;

/// How close (in direction angle) the tail velocity of a trapped trajectory
/// must come to the tail velocity of the torus-resident orbit: both approach
/// the same linear flow, at a rate set by the final torus distance.
pub const TRAP_ASYMPTOTIC_DIR_TOL: f64 = 1e-2;

/// P2 acceptance: the trapped trajectory must stay below `1 - this` in `t`.
pub const P2_MAX_T_MARGIN: f64 = 1e-3;

#[cfg(test)]
// Constant assertions are the point here: the tests pin relations between
// the tolerance constants so a retune that breaks an ordering fails loudly.
#[allow(clippy::assertions_on_constants)]
mod tests {
    use super::*;

    /// The thresholds form a hierarchy; if someone retunes one and breaks the
    /// ordering the suite should say so explicitly rather than misbehave.
    #[test]
    fn orderings_that_the_logic_relies_on() {
        assert!(KERNEL_RESIDUAL_TOL < KERNEL_T_SIGN_MIN);
        assert!(P4_VT_NEG_TOL < KERNEL_T_SIGN_MIN);
        assert!(EVENT_LOCATION_TOL < P3_MATCH_TOL);
        assert!(P3_TOL < P3_MATCH_TOL);
        assert!(CLOSURE_GAP_CONTROL_CEIL < CLOSURE_GAP_FLOOR);
        assert!(RECLOSE_GAP > P3_MATCH_TOL); // a verified transit recloses
        assert!(DEMO_RECLOSE_FRACTION + DEMO_INCONCLUSIVE_FRACTION <= 1.0);
        assert!(DEMO_INCONCLUSIVE_FRACTION > P3_INCONCLUSIVE_FRACTION);
        assert!(TRAP_SEARCH_OFFSET < TRAP_RADIUS);
        assert!(TRAP_VERIFY_HORIZON > 2.0 * TRAP_DWELL);
        assert!(TRAP_ASYMPTOTIC_DIR_TOL > SYMMETRY_ANGLE_TOL);
        assert!(P3_ARC_REF >= 2.0); // straight transits stay at the base budget
        assert!(PULLBACK_COLLAR_TOL < PULLBACK_ANALYTIC_TOL);
        assert!(PULLBACK_ANALYTIC_TOL < PULLBACK_FD_TRIG_TOL);
        assert!(PULLBACK_FD_TRIG_TOL < PULLBACK_FD_TOL);
        assert!(SCENE_INTERFACE_TOL < RECLOSE_GAP);
    }

    #[test]
    fn all_positive() {
        for v in [
            C1_ORACLE_REL_TOL,
            KERNEL_RESIDUAL_TOL,
            KERNEL_DEGENERACY_RATIO,
            KERNEL_T_SIGN_MIN,
            P1_ANGLE_TOL,
            TRAP_RADIUS,
            TRAP_DWELL,
            MONOTONE_SLACK,
            P3_MATCH_TOL,
            P3_TOL,
            P4_VT_NEG_TOL,
            P4_TORUS_ANGLE_TOL,
            CLOSURE_GAP_FLOOR,
            CLOSURE_GAP_CONTROL_CEIL,
            SYMMETRY_ANGLE_TOL,
            PULLBACK_ANALYTIC_TOL,
            PULLBACK_FD_TOL,
            PULLBACK_FD_TRIG_TOL,
            FD_STEP,
            PULLBACK_COLLAR_TOL,
            PFAFFIAN_IDENTITY_TOL,
            SCENE_INTERFACE_TOL,
            RECLOSE_GAP,
            DEMO_RECLOSE_FRACTION,
            DEMO_INCONCLUSIVE_FRACTION,
            EVENT_LOCATION_TOL,
            TRAP_SEARCH_OFFSET,
            P2_MAX_T_MARGIN,
            P3_ARC_REF,
            TRAP_VERIFY_HORIZON,
            TRAP_ASYMPTOTIC_DIR_TOL,
        ] {
            assert!(v > 0.0);
        }
    }
}
