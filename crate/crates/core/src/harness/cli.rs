//! Command-line interface: scenario execution and registry listings.
//!
//! Exit codes: 0 when every asserted identity passes, 1 when at least one
//! asserted identity fails, 2 on configuration or usage errors.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};

use super::{
    builtin_scenario, check_named, emit_report, parse_scenario, parse_seed, run_scenario,
    ReportFormat, BUILTIN_SCENARIOS, CHECKS,
};

/// Residual checker for Finsler-geometry scenarios.
#[derive(Parser)]
#[command(name = "cartanlab", version, about)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario file (or built-in scenario) and print the report.
    Run {
        /// Path to a scenario file, or the name of a built-in scenario.
        scenario: String,
        /// Output format.
        #[arg(long, value_enum, default_value_t = FormatArg::Human)]
        format: FormatArg,
        /// Comma-separated identity names to evaluate (default: all).
        #[arg(long)]
        checks: Option<String>,
        /// Override the per-family sample-point count.
        #[arg(long)]
        points: Option<usize>,
        /// Override the sampling seed (hex with a 0x prefix, decimal otherwise).
        #[arg(long)]
        seed: Option<String>,
        /// Write the report to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List every identity the runner can evaluate.
    ListChecks,
    /// List the built-in scenarios.
    ListScenarios,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Human,
    Machine,
}

/// Parses the process arguments and runs the requested command, returning
/// the process exit code. Usage errors exit with status 2 via clap.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { scenario, format, checks, points, seed, out } => {
            run_command(&scenario, format, checks, points, seed, out)
        }
        Command::ListChecks => {
            println!(
                "{:<34} {:<8} {:>9} {:<6} description",
                "identity", "family", "tol", "kind"
            );
            for c in CHECKS {
                println!(
                    "{:<34} {:<8} {:>9.1e} {:<6} {}",
                    c.name,
                    c.family.label(),
                    c.tolerance,
                    if c.informational { "info" } else { "assert" },
                    c.description
                );
            }
            Ok(0)
        }
        Command::ListScenarios => {
            for (name, text) in BUILTIN_SCENARIOS {
                let blurb = text
                    .lines()
                    .find_map(|l| l.trim().strip_prefix('#'))
                    .map(str::trim)
                    .unwrap_or("");
                println!("{name:<34} {blurb}");
            }
            Ok(0)
        }
    }
}

fn run_command(
    scenario: &str,
    format: FormatArg,
    checks: Option<String>,
    points: Option<usize>,
    seed: Option<String>,
    out: Option<PathBuf>,
) -> Result<i32> {
    let (name, text) = load_scenario(scenario)?;
    let mut sc = parse_scenario(&text, &name)?;
    if let Some(p) = points {
        sc.points = p;
    }
    if let Some(s) = seed {
        sc.seed = parse_seed(&s)
            .ok_or_else(|| Error::Scenario(format!("malformed --seed `{s}`")))?;
    }
    if let Some(list) = checks {
        let mut set = BTreeSet::new();
        for raw in list.split(',') {
            let check = raw.trim();
            if check.is_empty() {
                continue;
            }
            if check_named(check).is_none() {
                return Err(Error::Scenario(format!(
                    "unknown check `{check}` (see list-checks)"
                )));
            }
            set.insert(check.to_string());
        }
        sc.checks = Some(set);
    }
    let report = run_scenario(&sc)?;
    let rendered = emit_report(
        &report,
        match format {
            FormatArg::Human => ReportFormat::Human,
            FormatArg::Machine => ReportFormat::Machine,
        },
    );
    match out {
        Some(path) => fs::write(&path, rendered)
            .map_err(|e| Error::Scenario(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(if report.pass { 0 } else { 1 })
}

/// Resolves the `run` argument: an existing file path wins, otherwise the
/// built-in scenario catalog is consulted.
fn load_scenario(arg: &str) -> Result<(String, String)> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {arg}: {e}")))?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(arg)
            .to_string();
        return Ok((name, text));
    }
    if let Some(text) = builtin_scenario(arg) {
        return Ok((arg.to_string(), text.to_string()));
    }
    Err(Error::Scenario(format!(
        "no scenario file or built-in named `{arg}` (see list-scenarios)"
    )))
}
