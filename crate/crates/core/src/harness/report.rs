//! Report emitters: a fixed-layout human table and a deterministic
//! machine-readable JSON document.
//!
//! Machine output is byte-for-byte reproducible for a fixed scenario and
//! seed except for the trailing wall-time field; floats are printed with 17
//! significant digits so parsing them back recovers the exact bit pattern.

use std::fmt::Write as _;

use super::{ReportRow, RunReport, DOMAIN_ERROR};

/// Output format for [`emit_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Human,
    Machine,
}

/// Renders a run report in the requested format.
pub fn emit_report(report: &RunReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Human => human(report),
        ReportFormat::Machine => machine(report),
    }
}

/// 17 significant digits: enough to reconstruct every finite f64 exactly.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn row_json(r: &ReportRow) -> String {
    format!(
        "{{\"point\": {}, \"family\": \"{}\", \"name\": \"{}\", \"lhs\": {}, \"rhs\": {}, \
         \"abs\": {}, \"rel\": {}, \"tol\": {}, \"informational\": {}, \"pass\": {}, \
         \"note\": \"{}\"}}",
        r.point,
        r.family.label(),
        esc(r.name),
        num(r.lhs_magnitude),
        num(r.rhs_magnitude),
        num(r.abs_residual),
        num(r.rel_residual),
        num(r.tolerance),
        r.informational,
        r.pass,
        esc(&r.note),
    )
}

fn machine(report: &RunReport) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    s.push_str("  \"schema_version\": 1,\n");
    let _ = writeln!(s, "  \"engine\": \"{}\",", esc(&report.engine));
    s.push_str("  \"scenario\": {\n");
    let _ = writeln!(s, "    \"name\": \"{}\",", esc(&report.scenario_name));
    let _ = writeln!(s, "    \"points\": {},", report.points);
    let _ = writeln!(s, "    \"seed\": \"0x{:X}\",", report.seed);
    s.push_str("    \"config\": [\n");
    let last = report.config_lines.len().saturating_sub(1);
    for (i, line) in report.config_lines.iter().enumerate() {
        let comma = if i == last { "" } else { "," };
        let _ = writeln!(s, "      \"{}\"{comma}", esc(line));
    }
    s.push_str("    ]\n");
    s.push_str("  },\n");
    s.push_str("  \"rows\": [\n");
    let last = report.rows.len().saturating_sub(1);
    for (i, r) in report.rows.iter().enumerate() {
        let comma = if i == last { "" } else { "," };
        let _ = writeln!(s, "    {}{comma}", row_json(r));
    }
    s.push_str("  ],\n");
    s.push_str("  \"summary\": [\n");
    let last = report.summary.len().saturating_sub(1);
    for (i, r) in report.summary.iter().enumerate() {
        let comma = if i == last { "" } else { "," };
        let _ = writeln!(
            s,
            "    {{\"name\": \"{}\", \"family\": \"{}\", \"points\": {}, \"max_rel\": {}, \
             \"tol\": {}, \"informational\": {}, \"pass\": {}}}{comma}",
            esc(r.name),
            r.family.label(),
            r.points,
            num(r.max_rel_residual),
            num(r.tolerance),
            r.informational,
            r.pass,
        );
    }
    s.push_str("  ],\n");
    let _ = writeln!(s, "  \"domain_errors\": {},", report.domain_errors);
    let _ = writeln!(s, "  \"pass\": {},", report.pass);
    let _ = writeln!(s, "  \"wall_time_ms\": {}", report.wall_time_ms);
    s.push_str("}\n");
    s
}

fn human(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario      {}", report.scenario_name);
    let _ = writeln!(s, "engine        {}", report.engine);
    let _ = writeln!(s, "seed          0x{:X}", report.seed);
    let _ = writeln!(s, "points        {} per family", report.points);
    let _ = writeln!(s, "domain errors {}", report.domain_errors);
    s.push('\n');
    let _ = writeln!(
        s,
        "{:<34} {:<8} {:>4} {:>12} {:>9}  verdict",
        "identity", "family", "pts", "max-rel", "tol"
    );
    for r in &report.summary {
        let verdict = if r.informational {
            "info"
        } else if r.pass {
            "pass"
        } else {
            "FAIL"
        };
        let _ = writeln!(
            s,
            "{:<34} {:<8} {:>4} {:>12.3e} {:>9.1e}  {verdict}",
            r.name,
            r.family.label(),
            r.points,
            r.max_rel_residual,
            r.tolerance,
        );
    }

    let failures: Vec<&ReportRow> = report
        .rows
        .iter()
        .filter(|r| !r.informational && !r.pass)
        .collect();
    if !failures.is_empty() {
        s.push('\n');
        s.push_str("failures:\n");
        for r in failures {
            let _ = writeln!(
                s,
                "  point {:<3} {:<34} rel {:.3e} > tol {:.1e}",
                r.point, r.name, r.rel_residual, r.tolerance
            );
        }
    }
    let domain: Vec<&ReportRow> = report.rows.iter().filter(|r| r.name == DOMAIN_ERROR).collect();
    if !domain.is_empty() {
        s.push('\n');
        s.push_str("domain errors:\n");
        for r in domain {
            let _ = writeln!(s, "  point {:<3} {:<8} {}", r.point, r.family.label(), r.note);
        }
    }

    let asserted = report.summary.iter().filter(|r| !r.informational).count();
    let informational = report.summary.len() - asserted;
    s.push('\n');
    let _ = writeln!(
        s,
        "verdict: {} ({asserted} asserted, {informational} informational, {} domain errors)",
        if report.pass { "PASS" } else { "FAIL" },
        report.domain_errors,
    );
    let _ = writeln!(s, "wall time: {} ms", report.wall_time_ms);
    s
}

#[cfg(test)]
mod tests {
    use super::super::{CheckFamily, SummaryRow};
    use super::*;

    fn sample_report() -> RunReport {
        let row = ReportRow {
            point: 0,
            family: CheckFamily::Ambient,
            name: "metric.fd-tensor",
            lhs_magnitude: 1.5,
            rhs_magnitude: 1.5,
            abs_residual: 2e-9,
            rel_residual: 8e-10,
            tolerance: 1e-6,
            informational: false,
            pass: true,
            note: String::new(),
        };
        let summary = SummaryRow {
            name: "metric.fd-tensor",
            family: CheckFamily::Ambient,
            points: 1,
            max_rel_residual: 8e-10,
            tolerance: 1e-6,
            informational: false,
            pass: true,
        };
        RunReport {
            scenario_name: "synthetic".into(),
            engine: "cartanlab 0.1.0".into(),
            seed: 0x4631_4E35,
            points: 1,
            config_lines: vec!["metric.kind = euclidean".into()],
            rows: vec![row],
            summary: vec![summary],
            domain_errors: 0,
            pass: true,
            wall_time_ms: 7,
        }
    }

    #[test]
    fn numbers_round_trip_exactly() {
        let values = [
            0.0,
            -0.0,
            0.1,
            1.0 / 3.0,
            -2.5e17,
            1e-300,
            6.02214076e23,
            f64::MIN_POSITIVE,
            std::f64::consts::PI,
        ];
        for &v in &values {
            let printed = num(v);
            let back: f64 = printed.parse().expect("parses back");
            assert_eq!(back.to_bits(), v.to_bits(), "{printed}");
        }
    }

    #[test]
    fn json_strings_are_escaped() {
        assert_eq!(esc("a\"b\\c\nd"), "a\\\"b\\\\c\\nd");
        assert_eq!(esc("\u{1}"), "\\u0001");
        assert_eq!(esc("plain"), "plain");
    }

    #[test]
    fn machine_report_has_the_stable_shape() {
        let text = machine(&sample_report());
        for needle in [
            "\"schema_version\": 1,",
            "\"engine\": \"cartanlab 0.1.0\",",
            "\"name\": \"synthetic\",",
            "\"seed\": \"0x46314E35\",",
            "\"config\": [",
            "\"rows\": [",
            "\"summary\": [",
            "\"domain_errors\": 0,",
            "\"pass\": true,",
            "\"wall_time_ms\": 7",
            "\"name\": \"metric.fd-tensor\"",
        ] {
            assert!(text.contains(needle), "missing {needle:?} in:\n{text}");
        }
    }

    #[test]
    fn human_report_prints_summary_and_verdict() {
        let text = human(&sample_report());
        assert!(text.contains("scenario      synthetic"), "{text}");
        assert!(text.contains("metric.fd-tensor"), "{text}");
        assert!(text.contains("verdict: PASS"), "{text}");

        let mut failing = sample_report();
        failing.rows[0].pass = false;
        failing.summary[0].pass = false;
        failing.pass = false;
        let text = human(&failing);
        assert!(text.contains("failures:"), "{text}");
        assert!(text.contains("verdict: FAIL"), "{text}");
    }
}
