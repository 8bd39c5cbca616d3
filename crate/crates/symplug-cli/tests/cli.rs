//! End-to-end tests of the binary: exit codes, output contracts, and
//! byte-for-byte determinism, driven through the real argv interface.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_symplug"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

/// A scratch directory that exists for the duration of one test.
fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("symplug-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("scratch dir");
    dir
}

#[test]
fn validate_passes_on_defaults_in_both_formats() {
    let out = run(&["validate"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("validate: all checks pass"));

    let out = run(&["validate", "--format", "records", "--density", "16"]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).expect("each line is JSON"))
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["check"], "validate_params");
    assert_eq!(lines[1]["check"], "profile_axioms");
    assert!(lines.iter().all(|l| l["pass"] == true));
}

#[test]
fn verify_subset_prints_one_line_per_property() {
    let out = run(&["verify", "P1", "SYM"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("P1        PASS"));
    assert!(text.contains("SYM       PASS"));
    assert!(!text.contains("P2"), "unrequested property ran:\n{text}");
}

#[test]
fn verify_rejects_unknown_property_with_usage_exit() {
    let out = run(&["verify", "P9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown property"));
}

#[test]
fn rational_torus_slope_fails_p4_naming_the_closure_gap() {
    let dir = scratch("rational");
    let cfg = dir.join("rational.cfg");
    std::fs::write(&cfg, "theta_tilde_tan = 1.0\n").unwrap();
    let out = run(&["verify", "P4", "--config", cfg.to_str().unwrap(), "--horizon", "60"]);
    assert_eq!(out.status.code(), Some(1), "stdout: {}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("P4        FAIL"));
    assert!(text.contains("min_closure_gap"), "failure not named:\n{text}");
}

#[test]
fn hard_constraint_violations_are_config_errors_outside_validate() {
    let dir = scratch("hard");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "eps = 0.9\n").unwrap();
    let out = run(&["verify", "P1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("eps_at_most_half"));

    // `validate` is the reporting path: it runs and fails instead.
    let out = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn missing_config_and_malformed_start_are_usage_errors() {
    let out = run(&["validate", "--config", "/no/such/file.cfg"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["trace", "--start", "1,2,3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("5 comma-separated"));

    let out = run(&["trace", "--start", "0,0,zebra,0,-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trace_writes_the_columnar_file() {
    let dir = scratch("trace");
    let out = run(&[
        "trace",
        "--start",
        "0,0,3.0,0.0,-1",
        "--horizon",
        "50",
        "--out",
        dir.to_str().unwrap(),
        "--format",
        "records",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    let record: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(record["check"], "trace");
    assert_eq!(record["status"], "ExitedTop");

    let table = std::fs::read_to_string(dir.join("trace.dat")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "# s theta1 theta2 theta3 x t v_t torus_dist_minus torus_dist_plus"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() > 10, "straight transit should sample ~20 rows");
    for row in &rows {
        assert_eq!(row.split_whitespace().count(), 9, "bad row: {row}");
    }
}

#[test]
fn records_output_is_byte_identical_across_runs() {
    let args = ["verify", "P1", "SYM", "--format", "records", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn demo_writes_a_dump_per_trace_and_passes() {
    let dir = scratch("demo");
    let out = run(&[
        "demo",
        "--controls",
        "6",
        "--out",
        dir.to_str().unwrap(),
        "--format",
        "records",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let record: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(record["property"], "DEMO");
    assert_eq!(record["pass"], true);

    let mut dumps: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    dumps.sort();
    // anchor + 6 controls + identity control.
    assert_eq!(dumps.len(), 8);
    assert_eq!(dumps[0], "demo_anchor.dat");
    assert_eq!(dumps[7], "demo_identity_anchor.dat");
    let anchor = std::fs::read_to_string(dir.join("demo_anchor.dat")).unwrap();
    assert!(anchor.contains("status Trapped"));
}
