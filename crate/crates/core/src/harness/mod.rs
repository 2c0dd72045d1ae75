//! Scenario runner: samples chart and bundle points deterministically,
//! evaluates every registered identity against its independent oracle, and
//! aggregates the residuals into a reproducible report.
//!
//! The runner is organized around a static check registry. Each check has a
//! stable dotted name, a family (ambient chart checks versus submanifold
//! bundle checks), a default tolerance, and a verdict policy: asserted checks
//! gate the run, informational checks document a closed-form candidate next
//! to its oracle without affecting the exit status.

pub mod cli;
pub mod report;
pub mod scenario;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ambient::{
    assemble_curvature, assemble_curvature_oracle, fd_levi_civita, metricity_residuals, Block3,
    Block4, BundleJets,
};
use crate::compare::{self, CompareContext, ComparisonRow};
use crate::error::{Error, Result};
use crate::field::fd_partial;
use crate::jet::Jet;
use crate::linalg::{invert_f64, values2, values3};
use crate::metric::{AmbientPoint, MetricModel};
use crate::submanifold::{lift_point, Immersion, SubContext, SubPoint};

pub use report::{emit_report, ReportFormat};
pub use scenario::{
    builtin_scenario, parse_scenario, parse_seed, ImmersionSpec, MetricSpec, Scenario,
    BUILTIN_SCENARIOS,
};

/// Default sampling seed: the bytes of "F1N5" read as hex.
pub const DEFAULT_SEED: u64 = 0x4631_4E35;

/// Name used for rows that report a sampling or evaluation failure instead
/// of an identity residual. Such rows are informational and never gate runs.
pub const DOMAIN_ERROR: &str = "domain-error";

/// Finite-difference oracles are compared at fd accuracy.
const TOL_FD: f64 = 1e-6;
/// Exact scaling laws hold to near machine precision.
const TOL_HOMOGENEITY: f64 = 1e-10;
/// Covariant-constancy residuals of the two metric blocks.
const TOL_METRICITY: f64 = 1e-9;
/// Frame/coframe contractions are linear-algebra exact.
const TOL_DUALITY: f64 = 1e-11;
/// Cobasis restriction mixes jet and linear-algebra routes.
const TOL_COBASIS: f64 = 1e-9;
/// Tangential connection versus fd Christoffel symbols of the induced metric.
const TOL_GAUSS: f64 = 1e-8;
/// Horizontal coefficients versus fd Christoffel symbols of the base metric.
const TOL_LEVI_CIVITA: f64 = 1e-10;

/// Identity family: ambient checks run at chart points, bundle checks at
/// submanifold parameter points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckFamily {
    Ambient,
    Bundle,
}

impl CheckFamily {
    /// Lowercase label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            CheckFamily::Ambient => "ambient",
            CheckFamily::Bundle => "bundle",
        }
    }
}

/// Registry entry: a named identity with its default verdict policy.
#[derive(Debug)]
pub struct CheckDef {
    pub name: &'static str,
    pub family: CheckFamily,
    pub tolerance: f64,
    pub informational: bool,
    pub description: &'static str,
}

macro_rules! checks {
    ($( $name:literal, $family:ident, $tol:expr, $info:literal, $desc:literal; )*) => {
        &[ $( CheckDef {
            name: $name,
            family: CheckFamily::$family,
            tolerance: $tol,
            informational: $info,
            description: $desc,
        }, )* ]
    };
}

/// Every identity the runner can evaluate, in `list-checks` order.
pub static CHECKS: &[CheckDef] = checks![
    "metric.fd-tensor", Ambient, TOL_FD, false,
        "fundamental tensor equals half the finite-difference fiber Hessian of the energy";
    "metric.levi-civita", Ambient, TOL_LEVI_CIVITA, false,
        "quadratic metrics: horizontal coefficients equal fd Christoffel symbols of the base metric";
    "homogeneity.h", Ambient, TOL_HOMOGENEITY, false,
        "fiber metric is invariant under y -> lambda y after weighting by lambda^2";
    "homogeneity.n", Ambient, TOL_HOMOGENEITY, false,
        "nonlinear connection coefficients scale linearly under y -> lambda y";
    "homogeneity.spray", Ambient, TOL_HOMOGENEITY, false,
        "spray coefficients scale quadratically under y -> lambda y";
    "homogeneity.c01", Ambient, TOL_HOMOGENEITY, false,
        "mixed vertical coefficients scale as 1/lambda under y -> lambda y";
    "metricity.l00-g", Ambient, TOL_METRICITY, false,
        "horizontal covariant derivative of the base metric block vanishes";
    "metricity.c01-g", Ambient, TOL_METRICITY, false,
        "vertical covariant derivative of the base metric block vanishes";
    "metricity.l10-h", Ambient, TOL_METRICITY, false,
        "horizontal covariant derivative of the fiber metric block vanishes";
    "metricity.c11-h", Ambient, TOL_METRICITY, false,
        "vertical covariant derivative of the fiber metric block vanishes";
    "curvature-oracle.rh", Ambient, TOL_FD, false,
        "hh curvature block, formula versus frame-commutator oracle";
    "curvature-oracle.ph", Ambient, TOL_FD, false,
        "hv curvature block, formula versus frame-commutator oracle";
    "curvature-oracle.sh", Ambient, TOL_FD, false,
        "vv curvature block (horizontal family), formula versus frame-commutator oracle";
    "curvature-oracle.rv", Ambient, TOL_FD, false,
        "hh curvature block (vertical family), formula versus frame-commutator oracle";
    "curvature-oracle.pv", Ambient, TOL_FD, false,
        "hv curvature block (vertical family), formula versus frame-commutator oracle";
    "curvature-oracle.sv", Ambient, TOL_FD, false,
        "vv curvature block (vertical family), formula versus frame-commutator oracle";
    "frame.duality", Bundle, TOL_DUALITY, false,
        "adapted frame and coframe contract to identity and zero blocks";
    "frame.cobasis-restriction", Bundle, TOL_COBASIS, false,
        "restricted ambient cobasis agrees with the submanifold cobasis on random directions";
    "gauss.tangent-l00", Bundle, TOL_GAUSS, false,
        "quadratic metrics: tangential coefficients equal fd Christoffel symbols of the induced metric";
    "compare.intrinsic-metric", Bundle, compare::TOL_INTRINSIC_METRIC, false,
        "restricted ambient fundamental tensor equals the intrinsic fundamental tensor";
    "compare.adapted-basis", Bundle, compare::TOL_DEFINITIONAL, false,
        "induced and intrinsic horizontal bases differ exactly by the connection difference";
    "compare.brackets.intrinsic", Bundle, compare::TOL_ASSERTED, false,
        "intrinsic bracket coefficients reproduce frame commutators on probe fields";
    "compare.brackets.induced", Bundle, compare::TOL_ASSERTED, false,
        "induced bracket coefficients reproduce frame commutators on probe fields";
    "compare.connection-difference", Bundle, compare::TOL_INFORMATIONAL, true,
        "mixed-metric closed form for the connection difference next to the direct subtraction";
    "compare.d100", Bundle, compare::TOL_DIFFERENCE, false,
        "closed form of the horizontal bracket difference versus the bracket-coefficient difference";
    "compare.d101", Bundle, compare::TOL_DIFFERENCE, false,
        "fiber derivative of the connection difference versus the mixed bracket-coefficient difference";
    "compare.c01", Bundle, compare::TOL_ASSERTED, false,
        "mixed vertical coefficients agree between the induced and intrinsic pipelines";
    "compare.c11", Bundle, compare::TOL_ASSERTED, false,
        "vertical coefficients agree between the induced and intrinsic pipelines";
    "compare.delta-h00", Bundle, compare::TOL_INFORMATIONAL, true,
        "closed form of the horizontal coefficient deformation next to its direct difference";
    "compare.delta-v10", Bundle, compare::TOL_INFORMATIONAL, true,
        "closed form of the fiber-weighted coefficient deformation next to its direct difference";
    "compare.delta-v10-remainder", Bundle, compare::TOL_INFORMATIONAL, true,
        "expanded remainder form of the fiber-weighted deformation next to its direct difference";
    "compare.deformation-hh-h", Bundle, compare::TOL_INFORMATIONAL, true,
        "horizontal part of the hh deformation assembled from difference tensors, next to its oracle";
    "compare.deformation-hh-v", Bundle, compare::TOL_INFORMATIONAL, true,
        "vertical part of the hh deformation assembled from difference tensors, next to its oracle";
    "compare.deformation-hv-h", Bundle, 0.0, false,
        "horizontal part of the hv deformation vanishes identically";
    "compare.deformation-hv-v", Bundle, compare::TOL_INFORMATIONAL, true,
        "vertical part of the hv deformation assembled from difference tensors, next to its oracle";
    "torsion.t00-intrinsic", Bundle, compare::TOL_ASSERTED, false,
        "intrinsic hh torsion vanishes";
    "torsion.t00-induced", Bundle, compare::TOL_INFORMATIONAL, true,
        "induced hh torsion shown next to zero (generally nonzero)";
    "torsion.s11-intrinsic", Bundle, compare::TOL_ASSERTED, false,
        "intrinsic vv torsion vanishes";
    "torsion.s11-induced", Bundle, compare::TOL_INFORMATIONAL, true,
        "induced vv torsion shown next to zero (generally nonzero)";
    "torsion.p10", Bundle, compare::TOL_ASSERTED, false,
        "hv torsion agrees between the induced and intrinsic pipelines";
    "torsion.r01", Bundle, compare::TOL_DIFFERENCE, false,
        "hh bracket torsions differ exactly by the horizontal bracket difference tensor";
    "torsion.p11", Bundle, compare::TOL_ASSERTED, false,
        "hv bracket torsions differ by the fiber difference terms";
    "curvature.sh", Bundle, compare::TOL_ASSERTED, false,
        "vv-horizontal curvature agrees between the pipelines";
    "curvature.sv", Bundle, compare::TOL_ASSERTED, false,
        "vv-vertical curvature agrees between the pipelines";
    "curvature.rh", Bundle, compare::TOL_INFORMATIONAL, true,
        "closed form of the hh-horizontal curvature gap next to the engine difference";
    "curvature.rv", Bundle, compare::TOL_INFORMATIONAL, true,
        "closed form of the hh-vertical curvature gap next to the engine difference";
    "curvature.ph", Bundle, compare::TOL_INFORMATIONAL, true,
        "closed form of the hv-horizontal curvature gap next to the engine difference";
    "curvature.pv", Bundle, compare::TOL_INFORMATIONAL, true,
        "closed form of the hv-vertical curvature gap next to the engine difference";
    "curvature.rh-intrinsic-basis", Bundle, compare::TOL_INFORMATIONAL, true,
        "hh-horizontal curvature gap with the induced blocks re-expressed in the intrinsic basis";
    "curvature.rv-intrinsic-basis", Bundle, compare::TOL_INFORMATIONAL, true,
        "hh-vertical curvature gap with the induced blocks re-expressed in the intrinsic basis";
    "curvature.ph-intrinsic-basis", Bundle, compare::TOL_INFORMATIONAL, true,
        "hv-horizontal curvature gap with the induced blocks re-expressed in the intrinsic basis";
    "curvature.pv-intrinsic-basis", Bundle, compare::TOL_INFORMATIONAL, true,
        "hv-vertical curvature gap with the induced blocks re-expressed in the intrinsic basis";
];

/// Looks a check up by its stable name.
pub fn check_named(name: &str) -> Option<&'static CheckDef> {
    CHECKS.iter().find(|c| c.name == name)
}

fn def(name: &str) -> &'static CheckDef {
    check_named(name).expect("name is registered")
}

/// One evaluated identity at one sample point.
#[derive(Clone, Debug)]
pub struct ReportRow {
    pub point: usize,
    pub family: CheckFamily,
    pub name: &'static str,
    pub lhs_magnitude: f64,
    pub rhs_magnitude: f64,
    pub abs_residual: f64,
    /// `abs_residual / (1 + max(|lhs|, |rhs|))`.
    pub rel_residual: f64,
    pub tolerance: f64,
    pub informational: bool,
    pub pass: bool,
    /// Empty except for domain-error rows, which carry the failure text.
    pub note: String,
}

/// Aggregate verdict for one identity across all sample points.
#[derive(Clone, Debug)]
pub struct SummaryRow {
    pub name: &'static str,
    pub family: CheckFamily,
    pub points: usize,
    pub max_rel_residual: f64,
    pub tolerance: f64,
    pub informational: bool,
    pub pass: bool,
}

/// Full outcome of a scenario run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub scenario_name: String,
    pub engine: String,
    pub seed: u64,
    pub points: usize,
    pub config_lines: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
    pub domain_errors: usize,
    /// True when every asserted row passes; domain errors and informational
    /// rows do not participate.
    pub pass: bool,
    pub wall_time_ms: u128,
}

fn selected(sc: &Scenario, name: &str) -> bool {
    sc.checks.as_ref().map_or(true, |set| set.contains(name))
}

fn build_row(
    sc: &Scenario,
    point: usize,
    d: &'static CheckDef,
    lhs: &[f64],
    rhs: &[f64],
) -> ReportRow {
    let (lhs_magnitude, rhs_magnitude, abs_residual, rel_residual) =
        compare::residual_stats(lhs, rhs);
    let tolerance = sc.tol_overrides.get(d.name).copied().unwrap_or(d.tolerance);
    ReportRow {
        point,
        family: d.family,
        name: d.name,
        lhs_magnitude,
        rhs_magnitude,
        abs_residual,
        rel_residual,
        tolerance,
        informational: d.informational,
        pass: rel_residual <= tolerance,
        note: String::new(),
    }
}

fn from_comparison(sc: &Scenario, point: usize, row: &ComparisonRow) -> ReportRow {
    let tolerance = sc.tol_overrides.get(row.name).copied().unwrap_or(row.tolerance);
    ReportRow {
        point,
        family: CheckFamily::Bundle,
        name: row.name,
        lhs_magnitude: row.lhs_magnitude,
        rhs_magnitude: row.rhs_magnitude,
        abs_residual: row.abs_residual,
        rel_residual: row.rel_residual,
        tolerance,
        informational: row.informational,
        pass: row.rel_residual <= tolerance,
        note: String::new(),
    }
}

fn domain_row(point: usize, family: CheckFamily, err: &Error) -> ReportRow {
    ReportRow {
        point,
        family,
        name: DOMAIN_ERROR,
        lhs_magnitude: 0.0,
        rhs_magnitude: 0.0,
        abs_residual: 0.0,
        rel_residual: 0.0,
        tolerance: 0.0,
        informational: true,
        pass: false,
        note: err.to_string(),
    }
}

fn flat2(a: &[Vec<f64>]) -> Vec<f64> {
    a.iter().flatten().copied().collect()
}

fn flat3(a: &Block3) -> Vec<f64> {
    a.iter().flatten().flatten().copied().collect()
}

fn flat4(a: &Block4) -> Vec<f64> {
    a.iter().flatten().flatten().flatten().copied().collect()
}

/// Uniform draw kept strictly inside the interval; samples within `1e-3` of
/// a boundary (or a quarter span for very narrow boxes) are excluded.
fn sample_interval(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let inset = 1e-3_f64.min(0.25 * (hi - lo));
    rng.gen_range(lo + inset..hi - inset)
}

/// Fiber component: a sign times a magnitude in `[0.25, 2)`, keeping sample
/// directions comfortably away from the null section.
fn sample_fiber(rng: &mut ChaCha8Rng) -> f64 {
    let mag = rng.gen_range(0.25..2.0);
    if rng.gen::<bool>() {
        mag
    } else {
        -mag
    }
}

const SAMPLE_RETRIES: usize = 64;

fn sample_ambient(
    rng: &mut ChaCha8Rng,
    model: &MetricModel,
    x_box: &[(f64, f64)],
) -> Result<AmbientPoint> {
    let n = model.dim();
    let mut last = None;
    for _ in 0..SAMPLE_RETRIES {
        let x: Vec<f64> = x_box.iter().map(|&iv| sample_interval(rng, iv)).collect();
        let y: Vec<f64> = (0..n).map(|_| sample_fiber(rng)).collect();
        match model.point(x, y) {
            Ok(pt) => return Ok(pt),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Scenario("ambient sampling failed".into())))
}

fn sample_bundle(
    rng: &mut ChaCha8Rng,
    model: &MetricModel,
    imm: &Immersion,
    u_box: &[(f64, f64)],
) -> Result<SubPoint> {
    let m = imm.m();
    let mut last = None;
    for _ in 0..SAMPLE_RETRIES {
        let u: Vec<f64> = u_box.iter().map(|&iv| sample_interval(rng, iv)).collect();
        let v: Vec<f64> = (0..m).map(|_| sample_fiber(rng)).collect();
        let pt = SubPoint { u, v };
        match lift_point(model, imm, &pt) {
            Ok(_) => return Ok(pt),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Scenario("bundle sampling failed".into())))
}

fn draw_directions(rng: &mut ChaCha8Rng, m: usize, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..count)
        .map(|_| {
            let du: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dv: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (du, dv)
        })
        .collect()
}

/// Induced base metric at `u` through the pullback route: the ambient tensor
/// contracted with the chart differential on both slots.
fn induced_metric_values(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<Vec<Vec<f64>>> {
    let amb = lift_point(model, imm, pt)?;
    let g = model.metric_at(&amb)?.g;
    let m = imm.m();
    let n = imm.n();
    let ex = imm.expand(&pt.u, 1);
    let b: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..m).map(|al| ex[a].deriv(al).value()).collect())
        .collect();
    let mut out = vec![vec![0.0; m]; m];
    for al in 0..m {
        for be in 0..m {
            let mut s = 0.0;
            for a in 0..n {
                for c in 0..n {
                    s += b[a][al] * g[a][c] * b[c][be];
                }
            }
            out[al][be] = s;
        }
    }
    Ok(out)
}

/// Christoffel symbols of the induced metric by Richardson-extrapolated
/// central differences; independent of the jet pipeline.
fn fd_induced_christoffels(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<Block3> {
    let m = imm.m();
    let g0 = induced_metric_values(model, imm, pt)?;
    let g_inv = invert_f64(&g0);
    // dg[si][be][ga] approximates the si-th partial of g_{be ga}.
    let mut dg = vec![vec![vec![0.0; m]; m]; m];
    for si in 0..m {
        let h = f64::EPSILON.powf(0.2) * (1.0 + pt.u[si].abs());
        let at = |s: f64| -> Result<Vec<Vec<f64>>> {
            let mut u = pt.u.clone();
            u[si] += s;
            induced_metric_values(model, imm, &SubPoint { u, v: pt.v.clone() })
        };
        let (p1, m1) = (at(h)?, at(-h)?);
        let (p2, m2) = (at(h / 2.0)?, at(-h / 2.0)?);
        for be in 0..m {
            for ga in 0..m {
                let d1 = (p1[be][ga] - m1[be][ga]) / (2.0 * h);
                let d2 = (p2[be][ga] - m2[be][ga]) / h;
                dg[si][be][ga] = (4.0 * d2 - d1) / 3.0;
            }
        }
    }
    let mut out = vec![vec![vec![0.0; m]; m]; m];
    for al in 0..m {
        for be in 0..m {
            for ga in 0..m {
                let mut s = 0.0;
                for si in 0..m {
                    s += g_inv[al][si] * (dg[be][si][ga] + dg[ga][si][be] - dg[si][be][ga]);
                }
                out[al][be][ga] = 0.5 * s;
            }
        }
    }
    Ok(out)
}

fn ambient_point_rows(
    sc: &Scenario,
    point: usize,
    model: &MetricModel,
    pt: &AmbientPoint,
) -> Result<Vec<ReportRow>> {
    let mut out = Vec::new();
    let has = |name: &str| {
        def(name).family == CheckFamily::Ambient && selected(sc, name)
    };
    let any_wanted = CHECKS
        .iter()
        .any(|d| d.family == CheckFamily::Ambient && selected(sc, d.name));
    if !any_wanted {
        return Ok(out);
    }
    let bj = BundleJets::at_point(model, pt)?;
    let n = bj.n;

    if has("metric.fd-tensor") {
        let g = values2(&bj.g);
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for a in 0..n {
            for b in 0..n {
                lhs.push(g[a][b]);
                rhs.push(0.5 * fd_partial(model.energy(), &pt.x, &pt.y, &[n + a, n + b]));
            }
        }
        out.push(build_row(sc, point, def("metric.fd-tensor"), &lhs, &rhs));
    }

    if has("metric.levi-civita") && model.chart_matrix(&pt.x).is_some() {
        let fd = fd_levi_civita(model, &pt.x)?;
        let l00 = values3(&bj.conn.l00);
        out.push(build_row(sc, point, def("metric.levi-civita"), &flat3(&l00), &flat3(&fd)));
    }

    let hom = ["homogeneity.h", "homogeneity.n", "homogeneity.spray", "homogeneity.c01"];
    if hom.iter().any(|name| has(name)) {
        let base_h = flat2(&values2(&bj.h));
        let base_n = flat2(&values2(&bj.n_conn));
        let base_spray: Vec<f64> = bj.spray.iter().map(Jet::value).collect();
        let base_c01 = flat3(&values3(&bj.conn.c01));
        let mut sides: [(Vec<f64>, Vec<f64>); 4] = Default::default();
        for &lam in &[0.5, 2.0, 3.0] {
            let scaled: Vec<f64> = pt.y.iter().map(|y| lam * y).collect();
            let ptl = model.point(pt.x.clone(), scaled)?;
            let bjl = BundleJets::at_point(model, &ptl)?;
            for (i, &v) in flat2(&values2(&bjl.h)).iter().enumerate() {
                sides[0].0.push(lam * lam * v);
                sides[0].1.push(base_h[i]);
            }
            for (i, &v) in flat2(&values2(&bjl.n_conn)).iter().enumerate() {
                sides[1].0.push(v);
                sides[1].1.push(lam * base_n[i]);
            }
            for (i, gj) in bjl.spray.iter().enumerate() {
                sides[2].0.push(gj.value());
                sides[2].1.push(lam * lam * base_spray[i]);
            }
            for (i, &v) in flat3(&values3(&bjl.conn.c01)).iter().enumerate() {
                sides[3].0.push(v);
                sides[3].1.push(base_c01[i] / lam);
            }
        }
        for (i, name) in hom.iter().enumerate() {
            if has(name) {
                out.push(build_row(sc, point, def(name), &sides[i].0, &sides[i].1));
            }
        }
    }

    let met = ["metricity.l00-g", "metricity.c01-g", "metricity.l10-h", "metricity.c11-h"];
    if met.iter().any(|name| has(name)) {
        let r = metricity_residuals(&bj);
        for (i, name) in met.iter().enumerate() {
            if has(name) {
                out.push(build_row(sc, point, def(name), &[r[i]], &[0.0]));
            }
        }
    }

    let oracle_names = [
        ("rh", "curvature-oracle.rh"),
        ("ph", "curvature-oracle.ph"),
        ("sh", "curvature-oracle.sh"),
        ("rv", "curvature-oracle.rv"),
        ("pv", "curvature-oracle.pv"),
        ("sv", "curvature-oracle.sv"),
    ];
    if oracle_names.iter().any(|(_, name)| has(name)) {
        let lit = assemble_curvature(&bj.conn, &bj.n_conn, &bj.cv);
        let orc = assemble_curvature_oracle(&bj.conn, &bj.n_conn, &bj.cv);
        for ((key, lb), (_, ob)) in lit.blocks().iter().zip(orc.blocks().iter()) {
            let name = oracle_names
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, n2)| *n2)
                .expect("curvature block name is registered");
            if has(name) {
                out.push(build_row(sc, point, def(name), &flat4(lb), &flat4(ob)));
            }
        }
    }

    Ok(out)
}

fn bundle_point_rows(
    sc: &Scenario,
    point: usize,
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
    dirs: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<ReportRow>> {
    let mut out = Vec::new();
    let has = |name: &str| def(name).family == CheckFamily::Bundle && selected(sc, name);
    let compare_wanted = compare::ROW_NAMES.iter().any(|name| selected(sc, name));
    let frame_wanted =
        has("frame.duality") || has("frame.cobasis-restriction") || has("gauss.tangent-l00");
    if !compare_wanted && !frame_wanted {
        return Ok(out);
    }

    // The comparison context embeds a SubContext; build the cheaper one when
    // no cross-pipeline rows were selected.
    let ctx: Option<CompareContext>;
    let sub_only: Option<SubContext>;
    let sub: &SubContext = if compare_wanted {
        ctx = Some(CompareContext::build(model, imm, pt)?);
        sub_only = None;
        let _ = &sub_only;
        &ctx.as_ref().expect("just built").sub
    } else {
        ctx = None;
        sub_only = Some(SubContext::build(model, imm, pt)?);
        sub_only.as_ref().expect("just built")
    };

    if has("frame.duality") {
        let r = sub.duality_residuals();
        out.push(build_row(sc, point, def("frame.duality"), &r, &[0.0; 6]));
    }
    if has("frame.cobasis-restriction") {
        let res: Vec<f64> = dirs
            .iter()
            .map(|(du, dv)| sub.cobasis_restriction_residual(du, dv))
            .collect();
        let zeros = vec![0.0; res.len()];
        out.push(build_row(sc, point, def("frame.cobasis-restriction"), &res, &zeros));
    }
    if has("gauss.tangent-l00") && model.is_quadratic() {
        let fd = fd_induced_christoffels(model, imm, pt)?;
        let tang = sub.tangent.values();
        out.push(build_row(sc, point, def("gauss.tangent-l00"), &flat3(&tang.l00), &flat3(&fd)));
    }

    if let Some(c) = &ctx {
        let rep = c.report();
        for row in &rep.rows {
            if selected(sc, row.name) {
                out.push(from_comparison(sc, point, row));
            }
        }
    }

    Ok(out)
}

fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut acc: BTreeMap<&'static str, SummaryRow> = BTreeMap::new();
    for r in rows {
        if r.name == DOMAIN_ERROR {
            continue;
        }
        let e = acc.entry(r.name).or_insert_with(|| SummaryRow {
            name: r.name,
            family: r.family,
            points: 0,
            max_rel_residual: 0.0,
            tolerance: r.tolerance,
            informational: r.informational,
            pass: true,
        });
        e.points += 1;
        e.max_rel_residual = e.max_rel_residual.max(r.rel_residual);
        e.pass &= r.pass;
    }
    acc.into_values().collect()
}

/// Runs a scenario end to end. Sampling is deterministic in the seed; domain
/// failures at individual points become informational rows instead of
/// aborting the run.
pub fn run_scenario(sc: &Scenario) -> Result<RunReport> {
    let start = Instant::now();
    let model = sc.metric.build()?;
    let imm = sc.immersion.build(sc.metric.n)?;
    let x_box = sc.metric.x_box.clone();
    let u_box = sc.immersion.sample_box(&imm);
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let mut rows: Vec<ReportRow> = Vec::new();
    let mut domain_errors = 0usize;

    for point in 0..sc.points {
        let produced = sample_ambient(&mut rng, &model, &x_box)
            .and_then(|pt| ambient_point_rows(sc, point, &model, &pt));
        match produced {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => {
                domain_errors += 1;
                rows.push(domain_row(point, CheckFamily::Ambient, &e));
            }
        }
    }
    for point in 0..sc.points {
        let sampled = sample_bundle(&mut rng, &model, &imm, &u_box);
        let dirs = draw_directions(&mut rng, imm.m(), 20);
        let produced =
            sampled.and_then(|pt| bundle_point_rows(sc, point, &model, &imm, &pt, &dirs));
        match produced {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => {
                domain_errors += 1;
                rows.push(domain_row(point, CheckFamily::Bundle, &e));
            }
        }
    }

    rows.sort_by(|a, b| (a.point, a.name).cmp(&(b.point, b.name)));
    let summary = summarize(&rows);
    let pass = summary.iter().all(|s| s.informational || s.pass);
    Ok(RunReport {
        scenario_name: sc.name.clone(),
        engine: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        seed: sc.seed,
        points: sc.points,
        config_lines: sc.config_lines.clone(),
        rows,
        summary,
        domain_errors,
        pass,
        wall_time_ms: start.elapsed().as_millis(),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::compare::ROW_NAMES;

    fn randers_model() -> MetricModel {
        MetricModel::randers(
            vec![vec![1.0, 0.05, 0.0], vec![0.05, 1.2, 0.0], vec![0.0, 0.0, 0.9]],
            vec![0.3, 0.0, -0.1],
            1.0,
        )
        .expect("valid randers data")
    }

    fn plane_scenario(points: usize) -> Scenario {
        let text = scenario::builtin_scenario("euclidean-plane").expect("shipped");
        let mut sc = scenario::parse_scenario(text, "euclidean-plane").expect("parses");
        sc.points = points;
        sc
    }

    #[test]
    fn check_names_are_unique() {
        let mut seen = BTreeSet::new();
        for c in CHECKS {
            assert!(seen.insert(c.name), "duplicate check name {}", c.name);
        }
    }

    #[test]
    fn registry_mirrors_every_comparison_row_policy() {
        for name in ROW_NAMES {
            let d = check_named(name).expect("comparison row is registered");
            assert_eq!(d.family, CheckFamily::Bundle, "{name}");
        }
        let model = randers_model();
        let imm = Immersion::graph().expect("graph immersion");
        let pt = SubPoint { u: vec![0.4, -0.3], v: vec![0.8, 0.5] };
        let ctx = CompareContext::build(&model, &imm, &pt).expect("context");
        let rep = ctx.report();
        assert_eq!(rep.rows.len(), ROW_NAMES.len());
        for row in &rep.rows {
            let d = check_named(row.name).expect("registered");
            assert_eq!(d.tolerance, row.tolerance, "{}", row.name);
            assert_eq!(d.informational, row.informational, "{}", row.name);
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic_for_a_fixed_seed() {
        let sc = plane_scenario(2);
        let a = run_scenario(&sc).expect("first run");
        let b = run_scenario(&sc).expect("second run");
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!((ra.point, ra.name), (rb.point, rb.name));
            assert_eq!(ra.lhs_magnitude.to_bits(), rb.lhs_magnitude.to_bits(), "{}", ra.name);
            assert_eq!(ra.rel_residual.to_bits(), rb.rel_residual.to_bits(), "{}", ra.name);
        }
    }

    #[test]
    fn check_selection_limits_the_evaluated_rows() {
        let mut sc = plane_scenario(1);
        sc.checks = Some(["frame.duality".to_string()].into_iter().collect());
        let rep = run_scenario(&sc).expect("run");
        assert!(!rep.rows.is_empty());
        assert!(rep.rows.iter().all(|r| r.name == "frame.duality"));
        assert_eq!(rep.summary.len(), 1);
        assert!(rep.pass);

        sc.checks = Some(BTreeSet::new());
        let rep = run_scenario(&sc).expect("empty selection still runs");
        assert!(rep.rows.is_empty());
        assert!(rep.summary.is_empty());
        assert!(rep.pass);
    }

    #[test]
    fn tolerance_overrides_reverdict_rows() {
        let mut sc = plane_scenario(1);
        sc.checks = Some(["metric.fd-tensor".to_string()].into_iter().collect());
        sc.tol_overrides.insert("metric.fd-tensor".to_string(), 0.0);
        let rep = run_scenario(&sc).expect("run");
        let row = rep.rows.iter().find(|r| r.name == "metric.fd-tensor").expect("row");
        assert_eq!(row.tolerance, 0.0);
        // The fd Hessian of a quadratic energy carries rounding noise, so a
        // zero tolerance must flip the verdict.
        if row.rel_residual > 0.0 {
            assert!(!rep.pass);
        }
    }

    #[test]
    fn summaries_skip_domain_rows_and_gate_on_asserted_rows() {
        let ok = ReportRow {
            point: 0,
            family: CheckFamily::Ambient,
            name: "metric.fd-tensor",
            lhs_magnitude: 1.0,
            rhs_magnitude: 1.0,
            abs_residual: 0.0,
            rel_residual: 0.0,
            tolerance: 1e-6,
            informational: false,
            pass: true,
            note: String::new(),
        };
        let mut bad = ok.clone();
        bad.point = 1;
        bad.rel_residual = 1.0;
        bad.pass = false;
        let dom = domain_row(2, CheckFamily::Ambient, &Error::Scenario("synthetic".into()));
        let summary = summarize(&[ok, bad, dom]);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].points, 2);
        assert_eq!(summary[0].max_rel_residual, 1.0);
        assert!(!summary[0].pass);
    }
}
