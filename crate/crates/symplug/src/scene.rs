//! A toy periodic flow box and the insertion demonstration.
//!
//! The ambient space is `S^1_L x N`, the product of a `t`-circle of
//! circumference `L` with the plug cross-section `N = T^3 x [-eps, eps]`.
//! Its unmodified characteristic flow is `d/dt`: every characteristic is the
//! closed circle `{point} x S^1_L`. The plug is inserted in the sub-box
//! `t_scene in [0, 2]`, entry face at `t_scene = 0`, exit face at
//! `t_scene = 2`, with the trapped entry's cross-section coordinates as the
//! anchor.
//!
//! Because the plug matches exit to entry for every transiting orbit, the
//! composite flow re-closes every circle except the one through the anchor,
//! whose orbit is captured by the trapping torus and never returns: the
//! insertion destroys exactly one closed characteristic and creates none.
//! [`demo_destroy_orbit`] runs that experiment end to end.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{integrate, FlowStatus, IntegrateOptions, Trajectory};
use crate::params::PlugParams;
use crate::report::{Check, CheckKind, PropertyTag, VerificationReport};
use crate::sample::Halton;
use crate::scalar::Real;
use crate::thresholds::{
    DEMO_INCONCLUSIVE_FRACTION, DEMO_RECLOSE_FRACTION, P3_TOL, RECLOSE_GAP, SCENE_INTERFACE_TOL,
    TRAP_VERIFY_HORIZON,
};
use crate::verifier::{find_trapped_entry, EntrySpec};

/// What occupies the sub-box `t_scene in [0, 2]`: the plug, or nothing (the
/// negative control, leaving the periodic flow unmodified).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Insertion {
    Plug,
    Identity,
}

/// The periodic scene with one plug placement.
///
/// The placement is the affine identification `t_scene = t + 1` of the plug
/// box with `[0, 2]`, so the entry face `{t = -1}` sits on the section
/// `t_scene = 0` and the exit face on `t_scene = 2`. Ambient motion outside
/// the box is straight: constant cross-section coordinates, unit speed in
/// `t_scene`.
#[derive(Debug, Clone, Copy)]
pub struct AmbientScene<T> {
    pub params: PlugParams<T>,
    /// Circumference of the `t_scene`-circle; must exceed the box length 2.
    pub period: T,
    /// Cross-section coordinates of the destroyed orbit: the trapped entry.
    pub anchor: EntrySpec<T>,
    pub insertion: Insertion,
}

impl<T: Real> AmbientScene<T> {
    /// The same scene with the insertion replaced.
    pub fn with_insertion(mut self, insertion: Insertion) -> Self {
        self.insertion = insertion;
        self
    }
}

/// Constructs the scene: validates the period, finds the trapped entry, and
/// anchors the insertion there.
// Negated comparison so a NaN period fails closed into the error.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn build_scene<T: Real>(p: &PlugParams<T>, period: T) -> Result<AmbientScene<T>> {
    if !(period.widen() > 2.0) {
        return Err(Error::InvalidParameter(format!(
            "period L = {} must exceed the plug box length 2",
            period.widen()
        )));
    }
    let anchor = find_trapped_entry(p, T::of(5.0), T::of(P3_TOL))?;
    Ok(AmbientScene { params: *p, period, anchor, insertion: Insertion::Plug })
}

/// Verdict of one composite trace after at most one period of net
/// `t_scene`-advance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CompositeStatus {
    /// Returned to its start point on the section within the re-closure gap.
    Reclosed { gap: f64 },
    /// Completed the period but missed its start by more than the gap.
    Open { gap: f64 },
    /// The plug transit was captured by the trapping torus; the orbit never
    /// returns to the section.
    Trapped { dist: f64, dwell: f64 },
    /// The plug transit exhausted its horizon with no verdict.
    HorizonReached,
}

/// A straight ambient run at constant cross-section coordinates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AmbientSegment<T> {
    /// Cross-section coordinates `(theta1, theta2, theta3, x)`.
    pub n: [T; 4],
    pub t_from: T,
    pub t_to: T,
}

/// One leg of a composite trajectory.
#[derive(Debug, Clone, Serialize)]
pub enum CompositeSegment<T: Real> {
    Ambient(AmbientSegment<T>),
    Plug(Trajectory<T>),
}

/// A characteristic of the composite form: plug transits alternating with
/// straight ambient motion.
#[derive(Debug, Clone, Serialize)]
pub struct CompositeTrajectory<T: Real> {
    pub segments: Vec<CompositeSegment<T>>,
    pub status: CompositeStatus,
    /// Worst position mismatch across ambient/plug interfaces; bounded by
    /// the consistency gate, and exactly zero for the snapped exit faces.
    pub interface_mismatch: f64,
    /// Total arclength including the ambient legs.
    pub arclength: f64,
}

/// Follows the composite characteristic through one period, starting on the
/// entry section `t_scene = 0`.
///
/// With the plug inserted the trace is one plug transit followed by the
/// straight return leg from `t_scene = 2` around to `L = 0`; it re-closes
/// when the exit cross-section matches the entry within [`RECLOSE_GAP`] in
/// the periodic metric. A transit captured by the torus never exits and the
/// status is `Trapped`. Exits through any face other than the top are a
/// consistency error: the slab faces of the plug are flow-invariant.
pub fn trace_composite<T: Real>(
    scene: &AmbientScene<T>,
    start: &EntrySpec<T>,
    horizon: T,
    tol: T,
) -> Result<CompositeTrajectory<T>> {
    start.validate(&scene.params)?;
    if matches!(scene.insertion, Insertion::Identity) {
        let seg = AmbientSegment {
            n: [start.theta1, start.theta2, start.theta3, start.x],
            t_from: T::zero(),
            t_to: scene.period,
        };
        return Ok(CompositeTrajectory {
            segments: vec![CompositeSegment::Ambient(seg)],
            status: CompositeStatus::Reclosed { gap: 0.0 },
            interface_mismatch: 0.0,
            arclength: scene.period.widen(),
        });
    }

    let entry_point = start.point();
    let mut opts = IntegrateOptions::forward(horizon);
    opts.tol = tol;
    let traj = integrate(&scene.params, &entry_point, &opts)?;
    let plug_arc = traj.arclength.widen();

    match traj.status {
        FlowStatus::TrappedNear { dist, dwell, .. } => Ok(CompositeTrajectory {
            segments: vec![CompositeSegment::Plug(traj)],
            status: CompositeStatus::Trapped { dist, dwell },
            interface_mismatch: 0.0,
            arclength: plug_arc,
        }),
        FlowStatus::HorizonReached => Ok(CompositeTrajectory {
            segments: vec![CompositeSegment::Plug(traj)],
            status: CompositeStatus::HorizonReached,
            interface_mismatch: 0.0,
            arclength: plug_arc,
        }),
        FlowStatus::ExitedTop => {
            let exit = traj.end().point;
            let mismatch = (exit.t - T::one()).widen().abs();
            if mismatch > SCENE_INTERFACE_TOL {
                return Err(Error::Consistency(format!(
                    "plug exit missed the t_scene = 2 interface by {mismatch:e}"
                )));
            }
            let gap = exit.distance_n(&entry_point).widen();
            let ambient = AmbientSegment {
                n: [exit.theta1, exit.theta2, exit.theta3, exit.x],
                t_from: T::of(2.0),
                t_to: scene.period,
            };
            let status = if gap <= RECLOSE_GAP {
                CompositeStatus::Reclosed { gap }
            } else {
                CompositeStatus::Open { gap }
            };
            Ok(CompositeTrajectory {
                segments: vec![CompositeSegment::Plug(traj), CompositeSegment::Ambient(ambient)],
                status,
                interface_mismatch: mismatch,
                arclength: plug_arc + (scene.period.widen() - 2.0),
            })
        }
        FlowStatus::ExitedBottom | FlowStatus::ExitedSide => Err(Error::Consistency(format!(
            "forward transit left through an unexpected face: {:?}",
            traj.status
        ))),
    }
}

/// A demo run: the report plus every labeled trace, for plotting.
#[derive(Debug, Clone)]
pub struct DemoOutcome<T: Real> {
    pub report: VerificationReport,
    /// `anchor`, `control_NN`, and `identity_anchor`, in emission order.
    pub traces: Vec<(String, CompositeTrajectory<T>)>,
}

/// Runs the insertion experiment: the anchor orbit must be destroyed
/// (trapped), every control orbit must re-close, and removing the plug must
/// re-close everything including the anchor.
pub fn demo_destroy_orbit<T: Real>(
    p: &PlugParams<T>,
    period: T,
    n_controls: usize,
    seed: u64,
) -> Result<DemoOutcome<T>> {
    let scene = build_scene(p, period)?;
    let horizon = T::of(TRAP_VERIFY_HORIZON);
    let tol = T::of(P3_TOL);
    let mut report = VerificationReport::new(PropertyTag::Demo, p.params_hash(), seed);
    let mut traces = Vec::new();

    let anchor_trace = trace_composite(&scene, &scene.anchor, horizon, tol)?;
    let anchor_trapped = matches!(anchor_trace.status, CompositeStatus::Trapped { .. });
    report.push_check(Check::flag("anchor_orbit_destroyed", anchor_trapped));
    report.push_witness(
        "anchor (trapped entry)",
        Some({
            let q = scene.anchor.point();
            let w = q.to_array();
            [w[0].widen(), w[1].widen(), w[2].widen(), w[3].widen(), w[4].widen()]
        }),
        Some(format!("composite status: {:?}", anchor_trace.status)),
    );
    traces.push(("anchor".to_string(), anchor_trace));

    let mut halton = Halton::<4>::new(seed);
    let tau = T::tau();
    let mut n_reclosed = 0usize;
    let mut n_open = 0usize;
    let mut n_trapped = 0usize;
    let mut n_inconclusive = 0usize;
    let mut max_gap = 0.0f64;
    let mut worst: Option<(usize, f64)> = None;
    let mut controls = Vec::with_capacity(n_controls);
    for i in 0..n_controls {
        let u = halton.next_unit();
        let entry = EntrySpec::new(
            tau * T::of(u[0]),
            tau * T::of(u[1]),
            tau * T::of(u[2]),
            p.eps * T::of(2.0 * u[3] - 1.0),
        );
        let trace = trace_composite(&scene, &entry, horizon, tol)?;
        match trace.status {
            CompositeStatus::Reclosed { gap } => {
                n_reclosed += 1;
                if gap >= max_gap {
                    max_gap = gap;
                    worst = Some((i, gap));
                }
            }
            CompositeStatus::Open { gap } => {
                n_open += 1;
                report.push_witness(
                    format!("open control {i}"),
                    None,
                    Some(format!("missed its start by {gap:.3e} after one period")),
                );
            }
            CompositeStatus::Trapped { .. } => n_trapped += 1,
            CompositeStatus::HorizonReached => n_inconclusive += 1,
        }
        controls.push(entry);
        traces.push((format!("control_{i:02}"), trace));
    }

    // Negative control: with the plug removed, the periodic flow re-closes
    // everything, the anchor included.
    let identity = scene.with_insertion(Insertion::Identity);
    let mut identity_ok = true;
    let identity_anchor = trace_composite(&identity, &scene.anchor, horizon, tol)?;
    identity_ok &= matches!(identity_anchor.status, CompositeStatus::Reclosed { .. });
    for entry in &controls {
        let t = trace_composite(&identity, entry, horizon, tol)?;
        identity_ok &= matches!(t.status, CompositeStatus::Reclosed { .. });
    }
    traces.push(("identity_anchor".to_string(), identity_anchor));

    let n = n_controls.max(1) as f64;
    report.push_check(Check::new(
        "control_reclosed_fraction",
        n_reclosed as f64 / n,
        DEMO_RECLOSE_FRACTION,
        CheckKind::LowerBound,
    ));
    report.push_check(Check::new("max_reclose_gap", max_gap, RECLOSE_GAP, CheckKind::UpperBound));
    report.push_check(Check::new("open_controls", n_open as f64, 0.0, CheckKind::UpperBound));
    report.push_check(Check::new(
        "trapped_controls",
        n_trapped as f64,
        0.0,
        CheckKind::UpperBound,
    ));
    report.push_check(Check::new(
        "inconclusive_fraction",
        n_inconclusive as f64 / n,
        DEMO_INCONCLUSIVE_FRACTION,
        CheckKind::UpperBound,
    ));
    report.push_check(Check::flag("identity_insertion_recloses_everything", identity_ok));

    report.push_metric("period", period.widen());
    report.push_metric("n_controls", n_controls as f64);
    report.push_metric("n_reclosed", n_reclosed as f64);
    report.push_metric("n_open", n_open as f64);
    report.push_metric("n_trapped_controls", n_trapped as f64);
    report.push_metric("n_inconclusive", n_inconclusive as f64);
    report.push_metric("horizon", horizon.widen());
    if let Some((i, gap)) = worst {
        report.push_witness(
            format!("widest reclose gap (control {i})"),
            None,
            Some(format!("gap = {gap:.3e} against the {RECLOSE_GAP:.0e} gate")),
        );
    }
    report.push_note(format!(
        "re-closure judged after exactly one period of net advance, gap gate {RECLOSE_GAP:.0e} \
         at integrator tolerance {:.0e}",
        tol.widen()
    ));
    report.push_note(
        "controls that exhaust the horizon near the trapped entry are counted inconclusive, \
         not failed"
            .to_string(),
    );
    Ok(DemoOutcome { report, traces })
}
