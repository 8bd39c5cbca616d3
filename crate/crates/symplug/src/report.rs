//! Structured verification reports.
//!
//! Every checker in this crate answers with a [`VerificationReport`]: a list
//! of named [`Check`]s (each carrying its value, its threshold, and the
//! comparison that defines passing), free-form metrics, and witness points.
//! The pass bit is a pure function of the recorded checks, so a report can be
//! re-audited from its serialized form alone. Reports are plain `f64` data:
//! they serialize to JSON lines and render to a fixed-width table, and two
//! runs with the same parameters and seed produce byte-identical output.

use serde::{Deserialize, Serialize};

/// Which verified property a report speaks for.
///
/// Records serialize the same canonical names [`PropertyTag::name`] renders,
/// so a report's `property` field round-trips through the CLI vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropertyTag {
    /// Boundary verticality: the kernel is the `t`-axis on the collar.
    P1,
    /// Existence of an entry whose forward orbit never exits.
    P2,
    /// Entry-exit matching for transiting orbits.
    P3,
    /// Horizon-bounded aperiodicity surrogate.
    P4,
    /// Anti-equivariance of the kernel line under time reversal.
    #[serde(rename = "SYM")]
    Sym,
    /// Trapping-torus flow diagnostics (closure gaps, linear-flow angle).
    #[serde(rename = "TRAP_FLOW")]
    TrapFlow,
    /// Deformation checks between the plug form and the product normal form.
    #[serde(rename = "ISOTOPY")]
    Isotopy,
    /// The flow-box insertion demonstration.
    #[serde(rename = "DEMO")]
    Demo,
}

impl PropertyTag {
    /// Stable short name used in tables and CLI arguments.
    pub fn name(&self) -> &'static str {
        match self {
            PropertyTag::P1 => "P1",
            PropertyTag::P2 => "P2",
            PropertyTag::P3 => "P3",
            PropertyTag::P4 => "P4",
            PropertyTag::Sym => "SYM",
            PropertyTag::TrapFlow => "TRAP_FLOW",
            PropertyTag::Isotopy => "ISOTOPY",
            PropertyTag::Demo => "DEMO",
        }
    }
}

impl core::fmt::Display for PropertyTag {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Comparison a [`Check`] applies between its value and its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckKind {
    /// Passes when `value <= threshold`.
    UpperBound,
    /// Passes when `value >= threshold`.
    LowerBound,
    /// Passes when `value > threshold`.
    StrictLowerBound,
}

impl CheckKind {
    fn symbol(&self) -> &'static str {
        match self {
            CheckKind::UpperBound => "<=",
            CheckKind::LowerBound => ">=",
            CheckKind::StrictLowerBound => ">",
        }
    }
}

/// One named pass/fail criterion with the numbers that decide it.
///
/// `pass` is derived from the other three fields at construction; a `NaN`
/// value fails every comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub kind: CheckKind,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: f64, kind: CheckKind) -> Self {
        let pass = match kind {
            CheckKind::UpperBound => value <= threshold,
            CheckKind::LowerBound => value >= threshold,
            CheckKind::StrictLowerBound => value > threshold,
        };
        Check { name: name.into(), value, threshold, kind, pass }
    }

    /// A boolean criterion encoded as 1.0 (holds) / 0.0 (violated).
    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        Check::new(name, if holds { 1.0 } else { 0.0 }, 1.0, CheckKind::LowerBound)
    }
}

/// Named scalar recorded for context; never part of the pass decision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

/// A point or trajectory summary attached to a report, typically the worst
/// offender or the constructed example a check talks about.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub label: String,
    /// Coordinates `(theta1, theta2, theta3, x, t)` when the witness is a
    /// point or a trajectory endpoint.
    pub point: Option<[f64; 5]>,
    pub detail: Option<String>,
}

/// Outcome of one property verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub property: PropertyTag,
    /// Conjunction of `checks[i].pass`; false for an empty check list.
    pub pass: bool,
    pub checks: Vec<Check>,
    pub metrics: Vec<Metric>,
    pub witnesses: Vec<Witness>,
    /// Caveats and context a bare pass/fail would hide (surrogate status,
    /// insufficient horizons, skipped points).
    pub notes: Vec<String>,
    /// Hash of the parameter set the run used.
    pub params_hash: String,
    /// Seed of the quasi-random sample set; zero for deterministic checks.
    pub seed: u64,
}

impl VerificationReport {
    pub fn new(property: PropertyTag, params_hash: impl Into<String>, seed: u64) -> Self {
        VerificationReport {
            property,
            pass: false,
            checks: Vec::new(),
            metrics: Vec::new(),
            witnesses: Vec::new(),
            notes: Vec::new(),
            params_hash: params_hash.into(),
            seed,
        }
    }

    /// A report that refuses to run because the parameter set is invalid;
    /// carries one failing check per violated constraint.
    pub fn refusal(
        property: PropertyTag,
        validation: &crate::params::ValidationReport,
        seed: u64,
    ) -> Self {
        let mut rep = VerificationReport::new(property, validation.params_hash.clone(), seed);
        for item in &validation.items {
            if !item.pass {
                rep.push_check(Check::flag(format!("params_{}", item.name), false));
                rep.push_note(format!("parameter validation failed: {} ({})", item.name, item.detail));
            }
        }
        if rep.checks.is_empty() {
            rep.push_check(Check::flag("params_valid", false));
        }
        rep
    }

    pub fn push_check(&mut self, check: Check) {
        self.pass = if self.checks.is_empty() { check.pass } else { self.pass && check.pass };
        self.checks.push(check);
    }

    pub fn push_metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push(Metric { name: name.into(), value });
    }

    pub fn push_witness(&mut self, label: impl Into<String>, point: Option<[f64; 5]>, detail: Option<String>) {
        self.witnesses.push(Witness { label: label.into(), point, detail });
    }

    pub fn push_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// The failing check whose margin is worst, if any.
    pub fn worst_failure(&self) -> Option<&Check> {
        self.checks.iter().filter(|c| !c.pass).max_by(|a, b| {
            margin(a).partial_cmp(&margin(b)).unwrap_or(core::cmp::Ordering::Equal)
        })
    }

    /// One fixed-width summary line: tag, verdict, check tally, headline.
    pub fn render_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let n_pass = self.checks.iter().filter(|c| c.pass).count();
        let headline = match self.worst_failure() {
            Some(c) => format!("{} = {:.3e} (want {} {:.3e})", c.name, c.value, c.kind.symbol(), c.threshold),
            None => match self.checks.first() {
                Some(c) => format!("{} = {:.3e} ({} {:.3e})", c.name, c.value, c.kind.symbol(), c.threshold),
                None => String::from("no checks recorded"),
            },
        };
        format!(
            "{:<9} {:<4} {:>2}/{:<2} checks  {}",
            self.property.name(),
            verdict,
            n_pass,
            self.checks.len(),
            headline
        )
    }

    /// Serializes to a single JSON line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// How badly a failing check misses its threshold (absolute).
fn margin(c: &Check) -> f64 {
    if c.value.is_nan() {
        f64::INFINITY
    } else {
        (c.value - c.threshold).abs()
    }
}

/// Renders reports as a table, one line per property, with a verdict footer.
pub fn render_table(reports: &[VerificationReport]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<9} {:<4} {:>8}  {}\n", "property", "ok", "checks", "headline"));
    for rep in reports {
        out.push_str(&rep.render_line());
        out.push('\n');
        for note in &rep.notes {
            out.push_str(&format!("          note: {note}\n"));
        }
    }
    let all = reports.iter().all(|r| r.pass);
    out.push_str(if all { "all properties pass\n" } else { "FAILURES present\n" });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_is_a_pure_function_of_the_recorded_checks() {
        let mut rep = VerificationReport::new(PropertyTag::P1, "deadbeef", 7);
        rep.push_check(Check::new("worst_angle", 1e-12, 1e-8, CheckKind::UpperBound));
        assert!(rep.pass);
        rep.push_check(Check::new("min_gap", 1e-4, 1e-3, CheckKind::LowerBound));
        assert!(!rep.pass);

        // Re-derive the verdict from the serialized record alone.
        let back: VerificationReport = serde_json::from_str(&rep.to_json_line()).unwrap();
        let rederived = back.checks.iter().all(|c| match c.kind {
            CheckKind::UpperBound => c.value <= c.threshold,
            CheckKind::LowerBound => c.value >= c.threshold,
            CheckKind::StrictLowerBound => c.value > c.threshold,
        });
        assert_eq!(back.pass, rederived);
    }

    #[test]
    fn nan_fails_every_comparison() {
        assert!(!Check::new("u", f64::NAN, 1.0, CheckKind::UpperBound).pass);
        assert!(!Check::new("l", f64::NAN, 1.0, CheckKind::LowerBound).pass);
        assert!(!Check::new("s", f64::NAN, 1.0, CheckKind::StrictLowerBound).pass);
    }

    #[test]
    fn strict_bound_distinguishes_equality() {
        assert!(Check::new("ge", 0.0, 0.0, CheckKind::LowerBound).pass);
        assert!(!Check::new("gt", 0.0, 0.0, CheckKind::StrictLowerBound).pass);
    }

    #[test]
    fn table_flags_the_worst_failure_by_name() {
        let mut good = VerificationReport::new(PropertyTag::P3, "h", 1);
        good.push_check(Check::new("max_mismatch", 2e-7, 1e-5, CheckKind::UpperBound));
        let mut bad = VerificationReport::new(PropertyTag::P4, "h", 1);
        bad.push_check(Check::new("min_v_t", 0.2, 0.0, CheckKind::StrictLowerBound));
        bad.push_check(Check::new("min_closure_gap", 2e-9, 1e-3, CheckKind::LowerBound));
        bad.push_note("horizon-bounded check");
        let table = render_table(&[good, bad]);
        assert!(table.contains("P3        PASS"));
        assert!(table.contains("P4        FAIL"));
        assert!(table.contains("min_closure_gap"));
        assert!(table.contains("FAILURES present"));
        assert!(table.contains("note: horizon-bounded check"));
    }

    #[test]
    fn refusal_reports_name_each_violated_constraint() {
        let p =
            crate::params::PlugParams::<f64> { a_t: 0.4, ..crate::params::PlugParams::default() };
        let v = crate::params::validate_params(&p);
        let rep = VerificationReport::refusal(PropertyTag::P1, &v, 0);
        assert!(!rep.pass);
        assert!(rep.checks.iter().any(|c| c.name == "params_a_t_quarter"));
    }
}
