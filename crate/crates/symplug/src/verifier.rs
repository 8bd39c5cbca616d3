//! Runnable checks for the plug axioms.
//!
//! Each checker turns one defining property of the plug into measured
//! numbers with pinned thresholds (see [`crate::thresholds`]) and answers
//! with a [`VerificationReport`]:
//!
//! * [`verify_p1`] — on the boundary collar the characteristic line is the
//!   `t`-axis;
//! * [`find_trapped_entry`] / [`verify_p2`] — there is an entry point on
//!   `{t = -1}` whose forward orbit never exits;
//! * [`verify_p3`] — every orbit that does transit exits at the same
//!   cross-section coordinates it entered with;
//! * [`verify_p4_surrogate`] — no closed characteristic shorter than the
//!   horizon: `v_t` never points down, the invariant tori carry the linear
//!   flow of irrational slope, and sampled orbits keep a positive closure
//!   gap (a horizon-bounded surrogate, stated as such in the report);
//! * [`verify_symmetry`] — the characteristic line field is anti-equivariant
//!   under the time reversal `psi`.
//!
//! All checkers refuse to run (with a failing report naming the violated
//! constraint) when a hard parameter precondition is broken, and re-running
//! with the same seed reproduces every metric bit for bit.

use crate::error::{Error, Result};
use crate::flow::{
    closure_gap, integrate, kernel_direction, line_angle, torus_distance, FlowStatus,
    IntegrateOptions, Trajectory,
};
use crate::params::{validate_params, PlugParams};
use crate::point::{psi, wrap_angle, PlugPoint};
use crate::profiles::on_boundary_collar;
use crate::report::{Check, CheckKind, PropertyTag, VerificationReport};
use crate::sample::{CollarSampler, Halton, PointSampler};
use crate::scalar::Real;
use crate::thresholds::{
    CLOSURE_GAP_FLOOR, P1_ANGLE_TOL, P2_MAX_T_MARGIN, P3_ARC_REF, P3_INCONCLUSIVE_FRACTION,
    P3_TOL, P4_TORUS_ANGLE_TOL, P4_VT_NEG_TOL, SYMMETRY_ANGLE_TOL, TRAP_ASYMPTOTIC_DIR_TOL,
    TRAP_DWELL, TRAP_RADIUS, TRAP_SEARCH_OFFSET, TRAP_SEARCH_PROBE_ARC, TRAP_VERIFY_HORIZON,
};

/// Cross-section coordinates of an entry point; `t = -1` is implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntrySpec<T> {
    pub theta1: T,
    pub theta2: T,
    pub theta3: T,
    pub x: T,
}

impl<T: Real> EntrySpec<T> {
    /// Builds an entry spec, reducing the angles mod `2 pi`.
    pub fn new(theta1: T, theta2: T, theta3: T, x: T) -> Self {
        EntrySpec {
            theta1: wrap_angle(theta1),
            theta2: wrap_angle(theta2),
            theta3: wrap_angle(theta3),
            x,
        }
    }

    /// Drops the `t`-coordinate of a point on the entry face.
    pub fn from_point(q: &PlugPoint<T>) -> Self {
        EntrySpec::new(q.theta1, q.theta2, q.theta3, q.x)
    }

    /// The corresponding point of the entry face `{t = -1}`.
    pub fn point(&self) -> PlugPoint<T> {
        PlugPoint::new(self.theta1, self.theta2, self.theta3, self.x, -T::one())
    }

    /// Checks `|x| <= eps` against a parameter set.
    pub fn validate(&self, p: &PlugParams<T>) -> Result<()> {
        if self.x.abs() > p.eps {
            return Err(Error::DomainViolation {
                what: "entry x",
                value: self.x.widen(),
                lo: -p.eps.widen(),
                hi: p.eps.widen(),
            });
        }
        Ok(())
    }
}

/// Maps `f` over `items` on a small scoped thread pool, preserving order.
///
/// Each item is independent and deterministic, so the output (and every
/// report built from it) is identical to the sequential result.
fn par_map<I, R, F>(items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync,
{
    let n = items.len();
    let threads = std::thread::available_parallelism()
        .map(|t| t.get())
        .unwrap_or(1)
        .min(8)
        .min(n.max(1));
    if threads <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk_len = n.div_ceil(threads);
    let mut out: Vec<Option<R>> = (0..n).map(|_| None).collect();
    let f = &f;
    std::thread::scope(|scope| {
        for (ci, chunk) in out.chunks_mut(chunk_len).enumerate() {
            let base = ci * chunk_len;
            scope.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(&items[base + j]));
                }
            });
        }
    });
    out.into_iter().map(|r| r.expect("every slot filled")).collect()
}

fn point5(q: &PlugPoint<impl Real>) -> [f64; 5] {
    [q.theta1.widen(), q.theta2.widen(), q.theta3.widen(), q.x.widen(), q.t.widen()]
}

/// Boundary verticality: at every sampled collar point the kernel line must
/// be within [`P1_ANGLE_TOL`] of the `t`-axis. On the collar the twist
/// profile and all cross derivatives vanish identically, so the measured
/// worst angle is pure evaluation noise (zero in practice).
pub fn verify_p1<T: Real>(p: &PlugParams<T>, n_samples: usize, seed: u64) -> VerificationReport {
    let val = validate_params(p);
    if !val.hard_pass() {
        return VerificationReport::refusal(PropertyTag::P1, &val, seed);
    }
    let mut rep = VerificationReport::new(PropertyTag::P1, val.params_hash.clone(), seed);

    let t_axis = [T::zero(), T::zero(), T::zero(), T::zero(), T::one()];
    let mut sampler = CollarSampler::new(p, seed);
    let mut worst = 0.0f64;
    let mut worst_q: Option<PlugPoint<T>> = None;
    let mut off_collar = 0usize;
    let mut undefined = 0usize;
    for _ in 0..n_samples {
        let q = sampler.next_point();
        if !on_boundary_collar(p, &q) {
            off_collar += 1;
            continue;
        }
        match kernel_direction(p, &q) {
            Ok(k) => {
                let ang = line_angle(&k.direction, &t_axis).widen();
                if ang >= worst {
                    worst = ang;
                    worst_q = Some(q);
                }
            }
            Err(e) => {
                undefined += 1;
                rep.push_witness("kernel undefined on collar", Some(point5(&q)), Some(e.to_string()));
            }
        }
    }

    rep.push_check(Check::new(
        "worst_kernel_angle_to_t_axis",
        worst,
        P1_ANGLE_TOL,
        CheckKind::UpperBound,
    ));
    rep.push_check(Check::flag("all_samples_on_collar", off_collar == 0));
    rep.push_check(Check::flag("kernel_defined_everywhere", undefined == 0));
    rep.push_metric("n_samples", n_samples as f64);
    if let Some(q) = worst_q {
        rep.push_witness("worst-angle collar point", Some(point5(&q)), None);
    }
    rep
}

/// Constructs an entry point on `{t = -1}` whose forward orbit is captured
/// by the lower invariant torus.
///
/// Probes the four coordinate offsets of size [`TRAP_SEARCH_OFFSET`] from a
/// lower-torus point, integrates each backward until it leaves through the
/// entry face, and confirms the candidate by forward integration: only an
/// entry whose forward orbit re-enters the capture radius and dwells there
/// is returned. Offsets whose backward orbit stalls near the torus (the ones
/// pointing into the contracting directions) are reported in the error if no
/// probe round-trips.
pub fn find_trapped_entry<T: Real>(
    p: &PlugParams<T>,
    backward_horizon: T,
    tol: T,
) -> Result<EntrySpec<T>> {
    let val = validate_params(p);
    if !val.hard_pass() {
        let names: Vec<&str> =
            val.items.iter().filter(|i| !i.pass && i.hard).map(|i| i.name).collect();
        return Err(Error::InvalidParameter(format!(
            "parameter preconditions violated: {}",
            names.join(", ")
        )));
    }
    if backward_horizon <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "backward_horizon must be positive, got {backward_horizon}"
        )));
    }

    let base = p.torus_point(false, T::zero(), T::zero());
    let off = T::of(TRAP_SEARCH_OFFSET);
    let offsets: [(&str, T, T); 4] = [
        ("t-", T::zero(), -off),
        ("t+", T::zero(), off),
        ("x+", off, T::zero()),
        ("x-", -off, T::zero()),
    ];

    let probe_arc = backward_horizon.min(T::of(TRAP_SEARCH_PROBE_ARC));
    let mut last_stall: Option<(String, PlugPoint<T>, T)> = None;
    let mut pass_horizons = vec![probe_arc];
    if backward_horizon > probe_arc {
        pass_horizons.push(backward_horizon);
    }

    for horizon in pass_horizons {
        for (label, dx, dt) in offsets {
            let start =
                PlugPoint::new(base.theta1, base.theta2, base.theta3, base.x + dx, base.t + dt);
            let mut opts = IntegrateOptions::backward(horizon);
            opts.tol = tol;
            opts.trap_detection = false;
            let back = integrate(p, &start, &opts)?;
            if back.status != FlowStatus::ExitedBottom {
                last_stall = Some((
                    format!("offset {label}: backward status {:?}", back.status),
                    back.end().point,
                    back.arclength,
                ));
                continue;
            }
            let entry = EntrySpec::from_point(&back.end().point);
            let mut fwd_opts = IntegrateOptions::forward(T::of(TRAP_VERIFY_HORIZON));
            fwd_opts.tol = tol;
            let fwd = integrate(p, &entry.point(), &fwd_opts)?;
            if matches!(fwd.status, FlowStatus::TrappedNear { upper: false, .. }) {
                return Ok(entry);
            }
            last_stall = Some((
                format!("offset {label}: forward re-check status {:?}", fwd.status),
                fwd.end().point,
                fwd.arclength,
            ));
        }
    }

    let detail = match last_stall {
        Some((what, q, s)) => format!("{what}; stalled at {:?} after arclength {s}", point5(&q)),
        None => String::from("no probe produced a trajectory"),
    };
    Err(Error::SearchFailure {
        reason: format!("no probe offset produced a re-trapping entry ({detail})"),
    })
}

/// Trapping: the forward orbit of `entry` must stay inside the slab for the
/// whole `horizon`, never approach the exit face, and end inside the capture
/// radius of the lower torus.
///
/// Integration runs with the capture detector disabled so absence of exit is
/// verified on the full horizon rather than cut short at the dwell budget.
pub fn verify_p2<T: Real>(p: &PlugParams<T>, entry: &EntrySpec<T>, horizon: T) -> VerificationReport {
    let val = validate_params(p);
    if !val.hard_pass() {
        return VerificationReport::refusal(PropertyTag::P2, &val, 0);
    }
    let mut rep = VerificationReport::new(PropertyTag::P2, val.params_hash.clone(), 0);
    rep.push_metric("horizon", horizon.widen());
    rep.push_witness("entry", Some(point5(&entry.point())), None);

    if let Err(e) = entry.validate(p) {
        rep.push_check(Check::flag("entry_in_range", false));
        rep.push_note(format!("entry rejected: {e}"));
        return rep;
    }
    // "Never exits" is only evidence of trapping when the run outlasts the
    // dwell budget with room to spare; a short horizon can end inside the
    // capture ball on an orbit that would still have left.
    rep.push_check(Check::new(
        "horizon_covers_dwell_budget",
        horizon.widen(),
        2.0 * TRAP_DWELL,
        CheckKind::LowerBound,
    ));
    if horizon.widen() < 2.0 * TRAP_DWELL {
        rep.push_note(format!(
            "horizon {} is below twice the dwell budget {}; too short to distinguish trapping from slow transit",
            horizon, TRAP_DWELL
        ));
    }

    let mut opts = IntegrateOptions::forward(horizon);
    opts.trap_detection = false;
    let traj = match integrate(p, &entry.point(), &opts) {
        Ok(t) => t,
        Err(e) => {
            rep.push_check(Check::flag("integration_completed", false));
            rep.push_note(format!("integration failed: {e}"));
            return rep;
        }
    };

    let not_exited = matches!(
        traj.status,
        FlowStatus::HorizonReached | FlowStatus::TrappedNear { upper: false, .. }
    );
    let final_dist = torus_distance(p, &traj.end().point, false).widen();
    let mut max_t = f64::NEG_INFINITY;
    let mut dwell = 0.0f64;
    for w in traj.samples.windows(2) {
        max_t = max_t.max(w[1].raw[4].widen());
        let inside = torus_distance(p, &w[0].point, false).widen() < TRAP_RADIUS
            && torus_distance(p, &w[1].point, false).widen() < TRAP_RADIUS;
        if inside {
            dwell += (w[1].s - w[0].s).widen();
        }
    }
    max_t = max_t.max(traj.start().raw[4].widen());

    rep.push_check(Check::flag("never_exits_within_horizon", not_exited));
    rep.push_check(Check::new("final_torus_distance", final_dist, TRAP_RADIUS, CheckKind::UpperBound));
    rep.push_check(Check::new("max_t", max_t, 1.0 - P2_MAX_T_MARGIN, CheckKind::UpperBound));
    rep.push_metric("arclength", traj.arclength.widen());
    rep.push_metric("dwell_arclength", dwell);
    rep.push_metric("accepted_steps", traj.accepted_steps as f64);
    rep.push_note(format!("status: {:?}", traj.status));
    rep.push_witness("final point", Some(point5(&traj.end().point)), None);

    // Torus-distance envelope, downsampled to a dozen stations.
    let n = traj.samples.len();
    let stations = 12.min(n);
    for k in 0..stations {
        let i = k * (n - 1) / stations.max(1).saturating_sub(1).max(1);
        let smp = &traj.samples[i];
        let d = torus_distance(p, &smp.point, false).widen();
        rep.push_witness(
            "envelope",
            None,
            Some(format!("s = {:.3}, lower-torus distance = {:.6e}", smp.s.widen(), d)),
        );
    }
    rep
}

/// Squared-off classification of one transit sample used by [`verify_p3`].
struct TransitOutcome<T> {
    status: Option<FlowStatus>,
    mismatch: f64,
    allowed: f64,
    arclength: f64,
    entry: PlugPoint<T>,
    exit: Option<PlugPoint<T>>,
}

/// Entry-exit matching: every sampled orbit that leaves through the exit
/// face must do so at the cross-section coordinates it entered with, within
/// `tol` scaled linearly in arclength past [`P3_ARC_REF`]. Orbits captured
/// by a torus are excluded and counted; orbits still inside at the horizon
/// are inconclusive and capped at [`P3_INCONCLUSIVE_FRACTION`].
pub fn verify_p3<T: Real>(
    p: &PlugParams<T>,
    n_entries: usize,
    horizon: T,
    tol: T,
    seed: u64,
) -> VerificationReport {
    let val = validate_params(p);
    if !val.hard_pass() {
        return VerificationReport::refusal(PropertyTag::P3, &val, seed);
    }
    let mut rep = VerificationReport::new(PropertyTag::P3, val.params_hash.clone(), seed);

    let tau = T::tau();
    let mut halton = Halton::<4>::new(seed);
    let entries: Vec<PlugPoint<T>> = (0..n_entries)
        .map(|_| {
            let u = halton.next_unit();
            PlugPoint::new(
                T::of(u[0]) * tau,
                T::of(u[1]) * tau,
                T::of(u[2]) * tau,
                (T::of(2.0) * T::of(u[3]) - T::one()) * p.eps,
                -T::one(),
            )
        })
        .collect();

    let outcomes: Vec<TransitOutcome<T>> = par_map(&entries, |entry| {
        let mut opts = IntegrateOptions::forward(horizon);
        opts.tol = T::of(P3_TOL);
        match integrate(p, entry, &opts) {
            Ok(traj) => {
                let arc = traj.arclength.widen();
                let (mismatch, exit) = if traj.status == FlowStatus::ExitedTop {
                    let end = traj.end().point;
                    (entry.distance_n(&end).widen(), Some(end))
                } else {
                    (0.0, None)
                };
                let allowed = tol.widen() * (arc / P3_ARC_REF).max(1.0);
                TransitOutcome {
                    status: Some(traj.status),
                    mismatch,
                    allowed,
                    arclength: arc,
                    entry: *entry,
                    exit,
                }
            }
            Err(_) => TransitOutcome {
                status: None,
                mismatch: f64::NAN,
                allowed: tol.widen(),
                arclength: 0.0,
                entry: *entry,
                exit: None,
            },
        }
    });

    let mut n_exited = 0usize;
    let mut n_trapped = 0usize;
    let mut n_inconclusive = 0usize;
    let mut n_anomalous = 0usize;
    let mut max_scaled = 0.0f64;
    let mut max_raw = 0.0f64;
    let mut max_arc = 0.0f64;
    let mut worst: Option<&TransitOutcome<T>> = None;
    for o in &outcomes {
        max_arc = max_arc.max(o.arclength);
        match o.status {
            Some(FlowStatus::ExitedTop) => {
                n_exited += 1;
                max_raw = max_raw.max(o.mismatch);
                let scaled = o.mismatch / o.allowed;
                if scaled >= max_scaled {
                    max_scaled = scaled;
                    worst = Some(o);
                }
            }
            Some(FlowStatus::TrappedNear { .. }) => n_trapped += 1,
            Some(FlowStatus::HorizonReached) => n_inconclusive += 1,
            Some(FlowStatus::ExitedBottom) | Some(FlowStatus::ExitedSide) | None => {
                n_anomalous += 1;
                worst = worst.or(Some(o));
            }
        }
    }

    rep.push_check(Check::new(
        "max_mismatch_over_allowance",
        max_scaled,
        1.0,
        CheckKind::UpperBound,
    ));
    rep.push_check(Check::new(
        "inconclusive_fraction",
        n_inconclusive as f64 / n_entries.max(1) as f64,
        P3_INCONCLUSIVE_FRACTION,
        CheckKind::UpperBound,
    ));
    rep.push_check(Check::new("anomalous_exits", n_anomalous as f64, 0.0, CheckKind::UpperBound));
    rep.push_check(Check::flag("some_transits_observed", n_exited > 0));
    rep.push_metric("n_entries", n_entries as f64);
    rep.push_metric("n_exited", n_exited as f64);
    rep.push_metric("n_trapped", n_trapped as f64);
    rep.push_metric("n_inconclusive", n_inconclusive as f64);
    rep.push_metric("max_mismatch", max_raw);
    rep.push_metric("max_arclength", max_arc);
    rep.push_metric("base_tolerance", tol.widen());
    rep.push_note(format!(
        "match allowance = tol * max(1, arclength / {P3_ARC_REF}): integrator drift grows linearly in arclength"
    ));
    if let Some(o) = worst {
        rep.push_witness(
            "worst transit entry",
            Some(point5(&o.entry)),
            Some(format!(
                "mismatch = {:.3e}, allowed = {:.3e}, arclength = {:.3}",
                o.mismatch, o.allowed, o.arclength
            )),
        );
        if let Some(exit) = &o.exit {
            rep.push_witness("worst transit exit", Some(point5(exit)), None);
        }
    }
    rep
}

/// Aperiodicity surrogate, three required sub-checks:
///
/// 1. existence and sign — the kernel is defined at every probe (including
///    the exact torus points) and its `t`-component is nonnegative, strictly
///    positive away from the capture balls;
/// 2. torus flow — on both invariant tori the kernel is the constant linear
///    flow of slope `tan(theta3~)`;
/// 3. closure — no sampled orbit (torus residents included) comes back to
///    itself: every closure gap stays above [`CLOSURE_GAP_FLOOR`].
///
/// The report states explicitly that this bounds closed characteristics
/// *up to the horizon only*.
pub fn verify_p4_surrogate<T: Real>(
    p: &PlugParams<T>,
    n_grid: usize,
    n_traj: usize,
    horizon: T,
    seed: u64,
) -> VerificationReport {
    let val = validate_params(p);
    if !val.hard_pass() {
        return VerificationReport::refusal(PropertyTag::P4, &val, seed);
    }
    let mut rep = VerificationReport::new(PropertyTag::P4, val.params_hash.clone(), seed);
    rep.push_note(format!(
        "horizon-bounded surrogate: rules out closed characteristics of arclength <= {horizon}, not all of them"
    ));
    for item in val.items.iter().filter(|i| !i.pass) {
        rep.push_note(format!("parameter diagnostic: {} ({})", item.name, item.detail));
    }

    // Sub-check 1: kernel existence and t-sign on a quasi-random grid plus
    // the two exact torus points (where a degenerate twist shows up first).
    let mut sampler = PointSampler::new(p, seed);
    let mut grid: Vec<PlugPoint<T>> = (0..n_grid).map(|_| sampler.next_point()).collect();
    grid.push(p.torus_point(false, T::zero(), T::zero()));
    grid.push(p.torus_point(true, T::zero(), T::zero()));

    let mut n_degenerate = 0usize;
    let mut min_vt = f64::INFINITY;
    let mut min_vt_outside = f64::INFINITY;
    for q in &grid {
        match kernel_direction(p, q) {
            Ok(k) => {
                let vt = k.direction[4].widen();
                min_vt = min_vt.min(vt);
                let outside = torus_distance(p, q, false).widen() > TRAP_RADIUS
                    && torus_distance(p, q, true).widen() > TRAP_RADIUS;
                if outside {
                    min_vt_outside = min_vt_outside.min(vt.abs());
                }
            }
            Err(e) => {
                n_degenerate += 1;
                if n_degenerate <= 4 {
                    rep.push_witness("degenerate kernel", Some(point5(q)), Some(e.to_string()));
                }
            }
        }
    }
    rep.push_check(Check::new("degenerate_points", n_degenerate as f64, 0.0, CheckKind::UpperBound));
    rep.push_check(Check::new("min_v_t", min_vt, -P4_VT_NEG_TOL, CheckKind::LowerBound));
    rep.push_check(Check::new(
        "min_v_t_outside_capture_balls",
        min_vt_outside,
        0.0,
        CheckKind::StrictLowerBound,
    ));

    // Sub-check 2: torus flow direction. Points whose kernel is degenerate
    // are already flagged above; they are skipped (and counted) here so the
    // two sub-checks fail independently.
    let linear_flow = p.torus_direction();
    let mut torus_halton = Halton::<2>::new(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut worst_angle = 0.0f64;
    let mut worst_torus_q: Option<PlugPoint<T>> = None;
    let mut n_skipped = 0usize;
    for i in 0..n_grid {
        let u = torus_halton.next_unit();
        let q = p.torus_point(i % 2 == 1, T::of(u[0]) * T::tau(), T::of(u[1]) * T::tau());
        match kernel_direction(p, &q) {
            Ok(k) => {
                let ang = line_angle(&k.direction, &linear_flow).widen();
                if ang >= worst_angle {
                    worst_angle = ang;
                    worst_torus_q = Some(q);
                }
            }
            Err(_) => n_skipped += 1,
        }
    }
    rep.push_check(Check::new(
        "worst_torus_flow_angle",
        worst_angle,
        P4_TORUS_ANGLE_TOL,
        CheckKind::UpperBound,
    ));
    rep.push_metric("n_torus_points_skipped_degenerate", n_skipped as f64);
    if n_skipped > 0 {
        rep.push_note(format!(
            "torus-flow sub-check skipped {n_skipped} degenerate points (reported by the existence sub-check)"
        ));
    }
    if let Some(q) = worst_torus_q {
        rep.push_witness("worst torus-flow point", Some(point5(&q)), None);
    }

    // Sub-check 3: closure gaps of integrated orbits, torus residents first.
    let tau = T::tau();
    let mut entry_halton = Halton::<4>::new(seed ^ 0x517c_c1b7_2722_0a95);
    let mut starts: Vec<PlugPoint<T>> = vec![
        p.torus_point(false, T::zero(), T::zero()),
        p.torus_point(true, T::zero(), T::zero()),
    ];
    for _ in 0..n_traj.saturating_sub(starts.len()) {
        let u = entry_halton.next_unit();
        starts.push(PlugPoint::new(
            T::of(u[0]) * tau,
            T::of(u[1]) * tau,
            T::of(u[2]) * tau,
            (T::of(2.0) * T::of(u[3]) - T::one()) * p.eps,
            -T::one(),
        ));
    }

    let gaps: Vec<Option<(PlugPoint<T>, crate::flow::ClosureGap, f64)>> = par_map(&starts, |q| {
        let mut opts = IntegrateOptions::forward(horizon);
        opts.trap_detection = false;
        opts.sample_spacing = T::of(0.25);
        let traj = integrate(p, q, &opts).ok()?;
        let gap = closure_gap(&traj, T::one())?;
        Some((*q, gap, traj.arclength.widen()))
    });

    let mut min_gap = f64::INFINITY;
    let mut n_candidates = 0usize;
    let mut best: Option<&(PlugPoint<T>, crate::flow::ClosureGap, f64)> = None;
    for g in gaps.iter().flatten() {
        n_candidates += 1;
        if g.1.gap < min_gap {
            min_gap = g.1.gap;
            best = Some(g);
        }
    }
    if n_candidates == 0 {
        rep.push_note("no orbit produced a closure candidate pair within the horizon".to_string());
        min_gap = f64::INFINITY;
    }
    // A missing candidate pair means no near-return at all; treat as a gap
    // beyond any threshold but keep the JSON finite.
    if !min_gap.is_finite() {
        min_gap = f64::MAX;
    }
    rep.push_check(Check::new("min_closure_gap", min_gap, CLOSURE_GAP_FLOOR, CheckKind::LowerBound));
    rep.push_metric("n_grid", n_grid as f64);
    rep.push_metric("n_trajectories", starts.len() as f64);
    rep.push_metric("n_closure_candidates", n_candidates as f64);
    rep.push_metric("horizon", horizon.widen());
    if let Some((q, gap, arc)) = best {
        rep.push_witness(
            "closest self-return orbit",
            Some(point5(q)),
            Some(format!(
                "gap = {:.3e} between s = {:.3} and s = {:.3} (arclength {:.1}, refined = {})",
                gap.gap, gap.s_from, gap.s_to, arc, gap.refined
            )),
        );
    }
    rep
}

/// Anti-equivariance of the characteristic line field under the time
/// reversal `psi(theta-bar, x, t) = (theta-bar, x, -t)`: the kernel line at
/// `psi(q)` must be the `d psi`-image of the kernel line at `q`.
pub fn verify_symmetry<T: Real>(p: &PlugParams<T>, n_samples: usize, seed: u64) -> VerificationReport {
    let val = validate_params(p);
    if !val.hard_pass() {
        return VerificationReport::refusal(PropertyTag::Sym, &val, seed);
    }
    let mut rep = VerificationReport::new(PropertyTag::Sym, val.params_hash.clone(), seed);

    let mut sampler = PointSampler::new(p, seed);
    let mut points: Vec<PlugPoint<T>> = (0..n_samples).map(|_| sampler.next_point()).collect();
    // Deterministic extremes: a collar point (both lines are the t-axis) and
    // a point on the fixed locus {t = 0} (the check degenerates to
    // d psi-invariance of the line at q itself).
    points.push(PlugPoint::new(
        T::zero(),
        T::zero(),
        T::zero(),
        (p.a_x + p.eps) * T::of(0.5),
        T::zero(),
    ));
    points.push(PlugPoint::new(
        T::one(),
        T::of(2.0),
        p.theta_tilde + T::of(0.3),
        T::of(0.02),
        T::zero(),
    ));

    let mut worst = 0.0f64;
    let mut worst_q: Option<PlugPoint<T>> = None;
    let mut undefined = 0usize;
    for q in &points {
        let qr = psi(q);
        match (kernel_direction(p, q), kernel_direction(p, &qr)) {
            (Ok(ku), Ok(kw)) => {
                let u = ku.direction;
                let image = [u[0], u[1], u[2], u[3], -u[4]];
                let ang = line_angle(&kw.direction, &image).widen();
                if ang >= worst {
                    worst = ang;
                    worst_q = Some(*q);
                }
            }
            _ => undefined += 1,
        }
    }

    rep.push_check(Check::new(
        "worst_kernel_line_angle",
        worst,
        SYMMETRY_ANGLE_TOL,
        CheckKind::UpperBound,
    ));
    rep.push_check(Check::flag("kernel_defined_everywhere", undefined == 0));
    rep.push_metric("n_samples", points.len() as f64);
    if let Some(q) = worst_q {
        rep.push_witness("worst-angle point", Some(point5(&q)), None);
    }
    rep
}

/// Final unit velocity of a trajectory, for asymptotic-direction checks.
pub fn final_direction<T: Real>(traj: &Trajectory<T>) -> [T; 5] {
    traj.end().velocity
}

/// The trapping mechanism end to end: a trapped entry exists, its forward
/// orbit is captured by the lower torus, and its tail velocity converges to
/// the same direction as the torus-resident orbit (the irrational linear
/// flow both orbits share asymptotically).
///
/// `horizon` bounds the forward runs; anything below twice the dwell budget
/// is flagged the same way `verify_p2` flags it.
pub fn verify_trap_flow<T: Real>(p: &PlugParams<T>, horizon: T, seed: u64) -> VerificationReport {
    let val = validate_params(p);
    if !val.hard_pass() {
        return VerificationReport::refusal(PropertyTag::TrapFlow, &val, seed);
    }
    let mut rep = VerificationReport::new(PropertyTag::TrapFlow, val.params_hash.clone(), seed);
    rep.push_check(Check::new(
        "horizon_covers_dwell_budget",
        horizon.widen(),
        2.0 * TRAP_DWELL,
        CheckKind::LowerBound,
    ));

    let entry = match find_trapped_entry(p, T::of(5.0), T::of(P3_TOL)) {
        Ok(e) => e,
        Err(e) => {
            rep.push_check(Check::flag("trapped_entry_found", false));
            rep.push_note(format!("search failed: {e}"));
            return rep;
        }
    };
    rep.push_check(Check::flag("trapped_entry_found", true));
    rep.push_witness("trapped entry", Some(point5(&entry.point())), None);

    let opts = IntegrateOptions::forward(horizon);
    let trapped = integrate(p, &entry.point(), &opts);
    let resident = integrate(p, &p.torus_point(false, entry.theta1, entry.theta2), &opts);
    match (trapped, resident) {
        (Ok(trapped), Ok(resident)) => {
            rep.push_check(Check::flag(
                "entry_orbit_captured",
                matches!(trapped.status, FlowStatus::TrappedNear { upper: false, .. }),
            ));
            let capture = trapped
                .samples
                .iter()
                .find(|s| torus_distance(p, &s.point, false).widen() < TRAP_RADIUS)
                .map(|s| s.s.widen());
            if let Some(s) = capture {
                rep.push_metric("capture_arclength", s);
            }
            let angle = line_angle(&final_direction(&trapped), &final_direction(&resident));
            rep.push_check(Check::new(
                "tail_matches_torus_resident",
                angle.widen(),
                TRAP_ASYMPTOTIC_DIR_TOL,
                CheckKind::UpperBound,
            ));
            let torus_dir = p.torus_direction();
            rep.push_check(Check::new(
                "tail_matches_linear_flow",
                line_angle(&final_direction(&trapped), &torus_dir).widen(),
                TRAP_ASYMPTOTIC_DIR_TOL,
                CheckKind::UpperBound,
            ));
            rep.push_metric("entry_arclength", trapped.arclength.widen());
            rep.push_metric(
                "final_torus_distance",
                torus_distance(p, &trapped.end().point, false).widen(),
            );
        }
        (trapped, resident) => {
            rep.push_check(Check::flag("entry_orbit_captured", false));
            for (label, r) in [("entry", trapped), ("resident", resident)] {
                if let Err(e) = r {
                    rep.push_note(format!("{label} orbit failed to integrate: {e}"));
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PlugParams;
    use crate::thresholds::{P3_MATCH_TOL, TRAP_ASYMPTOTIC_DIR_TOL};

    fn params() -> PlugParams<f64> {
        PlugParams::default()
    }

    #[test]
    fn p1_kernel_is_exactly_vertical_on_the_collar() {
        let rep = verify_p1(&params(), 1000, 11);
        assert!(rep.pass, "{}", rep.render_line());
        let worst = rep.checks.iter().find(|c| c.name == "worst_kernel_angle_to_t_axis").unwrap();
        // The twist and all cross derivatives vanish identically on the
        // collar, so even the measured angle is exactly zero.
        assert_eq!(worst.value, 0.0);
    }

    #[test]
    fn p1_refuses_bump_widths_that_reach_the_faces() {
        let mut p = params();
        p.a_t = 0.4;
        let rep = verify_p1(&p, 100, 1);
        assert!(!rep.pass);
        assert!(rep.checks.iter().any(|c| c.name == "params_a_t_quarter" && !c.pass));
        assert!(rep.notes.iter().any(|n| n.contains("a_t")));
    }

    #[test]
    fn collar_filter_excludes_torus_neighborhoods() {
        let p = params();
        // Exact torus points and small perturbations of them are interior.
        for upper in [false, true] {
            let q = p.torus_point(upper, 0.3, 5.1);
            assert!(!on_boundary_collar(&p, &q));
            let nudged = PlugPoint::new(q.theta1, q.theta2, q.theta3 + 0.02, q.x + 0.01, q.t);
            assert!(!on_boundary_collar(&p, &nudged));
        }
        // The x-band and the middle t-band are collar.
        assert!(on_boundary_collar(&p, &PlugPoint::new(0.0, 0.0, 1.0, 0.2, -0.45)));
        assert!(on_boundary_collar(&p, &PlugPoint::new(0.0, 0.0, 1.0, 0.0, 0.0)));
    }

    #[test]
    fn trapped_entry_round_trips_through_p2() {
        let p = params();
        let entry = find_trapped_entry(&p, 50.0, 1e-10).expect("search succeeds on defaults");
        // The probe that round-trips leaves theta3 and x frozen on the leaf
        // of the lower torus.
        assert_eq!(entry.theta3, p.theta_tilde);
        assert_eq!(entry.x, 0.0);

        let rep = verify_p2(&p, &entry, 1e3);
        assert!(rep.pass, "{}", rep.render_line());
        let dist = rep.checks.iter().find(|c| c.name == "final_torus_distance").unwrap();
        assert!(dist.value < 1e-3, "asymptotic approach, got {}", dist.value);
        let dwell = rep.metrics.iter().find(|m| m.name == "dwell_arclength").unwrap();
        assert!(dwell.value > 500.0, "captured orbit dwells, got {}", dwell.value);
    }

    #[test]
    fn perturbing_the_trapped_entry_in_theta3_transits() {
        let p = params();
        let entry = find_trapped_entry(&p, 50.0, 1e-10).unwrap();
        let moved = EntrySpec::new(entry.theta1, entry.theta2, entry.theta3 + 0.2, entry.x);
        let traj = integrate(
            &p,
            &moved.point(),
            &IntegrateOptions::forward(crate::thresholds::TRAP_VERIFY_HORIZON),
        )
        .unwrap();
        assert_eq!(traj.status, FlowStatus::ExitedTop);
    }

    #[test]
    fn search_fails_cleanly_when_the_horizon_cannot_reach_the_face() {
        let p = params();
        let err = find_trapped_entry(&p, 0.3, 1e-10).unwrap_err();
        match err {
            Error::SearchFailure { reason } => {
                assert!(reason.contains("stalled"), "reason: {reason}")
            }
            other => panic!("expected SearchFailure, got {other:?}"),
        }
    }

    #[test]
    fn p2_fails_for_a_straight_entry_with_exited_status() {
        let p = params();
        let entry = EntrySpec::new(1.0, 2.0, p.theta_tilde + 2.0, 0.05);
        let rep = verify_p2(&p, &entry, 50.0);
        assert!(!rep.pass);
        assert!(rep
            .checks
            .iter()
            .any(|c| c.name == "never_exits_within_horizon" && !c.pass));
        assert!(rep.notes.iter().any(|n| n.contains("ExitedTop")));
    }

    #[test]
    fn p2_flags_an_insufficient_horizon() {
        let p = params();
        let entry = find_trapped_entry(&p, 50.0, 1e-10).unwrap();
        let rep = verify_p2(&p, &entry, 1.0);
        // The orbit actually reaches the capture ball within one unit of
        // arclength, so the distance check alone would pass; the report must
        // still fail because nothing so short can witness absence of exit.
        assert!(!rep.pass);
        assert!(rep
            .checks
            .iter()
            .any(|c| c.name == "horizon_covers_dwell_budget" && !c.pass));
        assert!(rep.notes.iter().any(|n| n.contains("dwell budget")));
    }

    #[test]
    fn p3_transits_match_their_entries_on_defaults() {
        let rep = verify_p3(&params(), 60, 50.0, P3_MATCH_TOL, 2);
        assert!(rep.pass, "{}", rep.render_line());
        let raw = rep.metrics.iter().find(|m| m.name == "max_mismatch").unwrap();
        assert!(raw.value < P3_MATCH_TOL, "raw mismatch {}", raw.value);
        let exited = rep.metrics.iter().find(|m| m.name == "n_exited").unwrap();
        assert!(exited.value >= 55.0, "almost all generic entries transit");
    }

    #[test]
    fn p3_mismatch_stays_linear_in_arclength_across_integrator_tolerances() {
        let p = params();
        // A straight transit, a curved one, and one dwelling near the torus.
        let entries = [
            PlugPoint::new(0.5, 1.5, p.theta_tilde + 2.0, 0.1, -1.0),
            PlugPoint::new(2.0, 0.3, p.theta_tilde + 0.2, 0.04, -1.0),
            PlugPoint::new(4.0, 2.5, p.theta_tilde + 0.03, 0.01, -1.0),
        ];
        for tol in [1e-8, 1e-10, 1e-12] {
            for entry in &entries {
                let mut opts = IntegrateOptions::forward(200.0);
                opts.tol = tol;
                let traj = integrate(&p, entry, &opts).unwrap();
                if traj.status != FlowStatus::ExitedTop {
                    continue; // capture is legal for the near-torus entry
                }
                let mismatch = entry.distance_n(&traj.end().point);
                let allowed = P3_MATCH_TOL * (traj.arclength / P3_ARC_REF).max(1.0);
                assert!(
                    mismatch <= allowed,
                    "tol {tol}: mismatch {mismatch:.3e} over arclength {:.1} exceeds {allowed:.3e}",
                    traj.arclength
                );
            }
        }
    }

    #[test]
    fn p4_passes_on_defaults_and_names_its_limits() {
        let rep = verify_p4_surrogate(&params(), 300, 4, 200.0, 3);
        assert!(rep.pass, "{}", rep.render_line());
        assert!(rep.notes.iter().any(|n| n.contains("horizon-bounded")));
        let gap = rep.checks.iter().find(|c| c.name == "min_closure_gap").unwrap();
        assert!(gap.value > CLOSURE_GAP_FLOOR && gap.value < 1.01, "torus residents dominate: {}", gap.value);
    }

    #[test]
    fn p4_rational_slope_fails_exactly_the_closure_subcheck() {
        let p = params().with_tan(1.0);
        let rep = verify_p4_surrogate(&p, 200, 3, 50.0, 3);
        assert!(!rep.pass);
        for c in &rep.checks {
            if c.name == "min_closure_gap" {
                assert!(!c.pass);
                assert!(
                    c.value < crate::thresholds::CLOSURE_GAP_CONTROL_CEIL,
                    "rational orbit closes, gap {}",
                    c.value
                );
            } else {
                assert!(c.pass, "unexpected failure in {}", c.name);
            }
        }
    }

    #[test]
    fn p4_zero_twist_fails_exactly_the_existence_subcheck() {
        let mut p = params();
        p.c_b = 0.0;
        let rep = verify_p4_surrogate(&p, 200, 3, 50.0, 3);
        assert!(!rep.pass);
        let degen = rep.checks.iter().find(|c| c.name == "degenerate_points").unwrap();
        assert!(!degen.pass, "both exact torus points are degenerate");
        assert_eq!(degen.value, 2.0);
        assert!(rep.witnesses.iter().any(|w| w.label == "degenerate kernel"));
        // The remaining sub-checks hold: away from the tori the form is
        // nondegenerate even with zero twist, and the torus-flow sub-check
        // skips what the existence sub-check already flagged.
        for name in ["min_v_t", "min_v_t_outside_capture_balls", "worst_torus_flow_angle", "min_closure_gap"] {
            let c = rep.checks.iter().find(|c| c.name == name).unwrap();
            assert!(c.pass, "{name} should not fail for zero twist");
        }
    }

    #[test]
    fn symmetry_is_exact_at_line_level() {
        let rep = verify_symmetry(&params(), 2000, 5);
        assert!(rep.pass, "{}", rep.render_line());
        let worst = rep.checks.iter().find(|c| c.name == "worst_kernel_line_angle").unwrap();
        // The closed-form kernel negates component-by-component under psi,
        // so normalization preserves the match bitwise and the measured
        // line angle is exactly zero.
        assert_eq!(worst.value, 0.0);
    }

    #[test]
    fn trapped_tail_velocity_approaches_the_torus_flow() {
        let p = params();
        let entry = find_trapped_entry(&p, 50.0, 1e-10).unwrap();
        let traj = integrate(
            &p,
            &entry.point(),
            &IntegrateOptions::forward(crate::thresholds::TRAP_VERIFY_HORIZON),
        )
        .unwrap();
        assert!(matches!(traj.status, FlowStatus::TrappedNear { upper: false, .. }));
        let tail = final_direction(&traj);
        let resident = p.torus_direction();
        let ang = line_angle(&tail, &resident);
        assert!(
            ang < TRAP_ASYMPTOTIC_DIR_TOL,
            "tail angle {ang} vs asymptotic budget {TRAP_ASYMPTOTIC_DIR_TOL}"
        );
    }

    #[test]
    fn reports_are_bitwise_reproducible_per_seed() {
        let p = params();
        let a = verify_p3(&p, 20, 30.0, P3_MATCH_TOL, 9).to_json_line();
        let b = verify_p3(&p, 20, 30.0, P3_MATCH_TOL, 9).to_json_line();
        assert_eq!(a, b);
        let c = verify_p4_surrogate(&p, 50, 3, 30.0, 9).to_json_line();
        let d = verify_p4_surrogate(&p, 50, 3, 30.0, 9).to_json_line();
        assert_eq!(c, d);
    }

    #[test]
    fn entry_spec_wraps_angles_and_validates_range() {
        let p = params();
        let e = EntrySpec::new(7.0, -1.0, 2.0, 0.1);
        assert!(e.theta1 < core::f64::consts::TAU && e.theta1 > 0.0);
        assert!(e.theta2 > 0.0);
        assert!(e.validate(&p).is_ok());
        assert!(EntrySpec::new(0.0, 0.0, 0.0, 0.3).validate(&p).is_err());
        let q = e.point();
        assert_eq!(q.t, -1.0);
    }

    #[test]
    fn trap_flow_report_passes_on_defaults_and_flags_short_horizons() {
        let p = params();
        let rep = verify_trap_flow(&p, crate::thresholds::TRAP_VERIFY_HORIZON, 3);
        assert!(rep.pass, "{rep:?}");
        assert!(rep.metrics.iter().any(|m| m.name == "capture_arclength"));

        let short = verify_trap_flow(&p, 1.0, 3);
        assert!(!short.pass);
        let flagged = short
            .checks
            .iter()
            .find(|c| c.name == "horizon_covers_dwell_budget")
            .expect("horizon check recorded");
        assert!(!flagged.pass);
    }
}
