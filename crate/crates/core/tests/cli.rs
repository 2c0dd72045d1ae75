//! End-to-end checks of the command-line interface: exit codes, output
//! formats, check filtering, and the registry listings.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use cartanlab::harness::{builtin_scenario, BUILTIN_SCENARIOS, CHECKS};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cartanlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("cartanlab-{}-{name}", std::process::id()))
}

#[test]
fn list_scenarios_names_all_builtins() {
    let out = run(&["list-scenarios"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for (name, _) in BUILTIN_SCENARIOS {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn list_checks_prints_every_registry_entry() {
    let out = run(&["list-checks"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for c in CHECKS {
        assert!(text.contains(c.name), "missing {} in:\n{text}", c.name);
    }
}

#[test]
fn run_passes_on_the_flat_scenario() {
    let out = run(&["run", "euclidean-plane", "--points", "1"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("verdict: PASS"), "{text}");
}

#[test]
fn machine_format_emits_the_structured_document() {
    let out = run(&["run", "euclidean-plane", "--points", "1", "--format", "machine"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("{\n"), "{text}");
    assert!(text.contains("\"schema_version\": 1,"), "{text}");
    assert!(text.contains("\"pass\": true,"), "{text}");
}

#[test]
fn checks_filter_limits_rows() {
    let out = run(&[
        "run",
        "euclidean-plane",
        "--points",
        "1",
        "--checks",
        "frame.duality",
        "--format",
        "machine",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("frame.duality"), "{text}");
    assert!(!text.contains("metric.fd-tensor"), "{text}");
}

#[test]
fn out_flag_writes_the_report_to_disk() {
    let path = temp_path("out.txt");
    let out = run(&[
        "run",
        "euclidean-plane",
        "--points",
        "1",
        "--out",
        path.to_str().expect("utf-8 path"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    let written = fs::read_to_string(&path).expect("report written");
    assert!(written.contains("verdict: PASS"), "{written}");
    let _ = fs::remove_file(&path);
}

#[test]
fn exit_code_distinguishes_assertion_failures() {
    // A zero tolerance on the fd row must fail: the finite-difference
    // Hessian of the Randers energy carries rounding noise.
    let text = format!(
        "{}tol.metric.fd-tensor = 0\n",
        builtin_scenario("randers-graph").expect("shipped")
    );
    let path = temp_path("fail.scn");
    fs::write(&path, text).expect("scenario written");
    let out = run(&[
        "run",
        path.to_str().expect("utf-8 path"),
        "--points",
        "1",
        "--checks",
        "metric.fd-tensor",
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("FAIL"), "{}", stdout(&out));
    let _ = fs::remove_file(&path);
}

#[test]
fn exit_code_flags_configuration_errors() {
    let out = run(&["run", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no scenario"), "{}", stderr(&out));

    let path = temp_path("broken.scn");
    fs::write(&path, "metric.kind euclidean\n").expect("scenario written");
    let out = run(&["run", path.to_str().expect("utf-8 path")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 1"), "{}", stderr(&out));
    let _ = fs::remove_file(&path);

    let out = run(&["run", "euclidean-plane", "--checks", "bogus.check"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown check"), "{}", stderr(&out));

    let out = run(&["run", "euclidean-plane", "--seed", "not-a-seed"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));
}

#[test]
fn seed_and_points_overrides_reach_the_report() {
    let out = run(&[
        "run",
        "euclidean-plane",
        "--points",
        "1",
        "--seed",
        "0xBEEF",
        "--format",
        "machine",
        "--checks",
        "frame.duality",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("\"seed\": \"0xBEEF\","), "{text}");
    assert!(text.contains("\"points\": 1,"), "{text}");
}
