//! Scenario configuration: the line-oriented `key = value` grammar, builders
//! for the shipped metric and immersion families, and the built-in scenario
//! catalog.
//!
//! A scenario names an ambient metric with a sampling box, an immersed
//! submanifold with a parameter box, a sample-point budget and seed, and
//! optional per-identity tolerance overrides. Everything else (which
//! identities exist, their default tolerances) lives in the check registry.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::metric::MetricModel;
use crate::submanifold::Immersion;

use super::{check_named, DEFAULT_SEED};

/// Default number of sample points per family (ambient and bundle).
pub const DEFAULT_POINTS: usize = 10;

/// Built-in scenarios shipped with the binary, by name.
pub const BUILTIN_SCENARIOS: [(&str, &str); 4] = [
    (
        "euclidean-plane",
        include_str!("../../scenarios/euclidean-plane.scn"),
    ),
    (
        "euclidean-sphere2",
        include_str!("../../scenarios/euclidean-sphere2.scn"),
    ),
    (
        "riemannian-sphere-chart-linear",
        include_str!("../../scenarios/riemannian-sphere-chart-linear.scn"),
    ),
    (
        "randers-graph",
        include_str!("../../scenarios/randers-graph.scn"),
    ),
];

/// Looks a built-in scenario up by name.
pub fn builtin_scenario(name: &str) -> Option<&'static str> {
    BUILTIN_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Ambient metric selection, sampling box included.
#[derive(Clone, Debug)]
pub struct MetricSpec {
    pub kind: String,
    pub n: usize,
    pub p: f64,
    /// Numeric parameter lists keyed by their `metric.params.` suffix.
    pub params: BTreeMap<String, Vec<f64>>,
    /// Chart sampling box, one interval per coordinate.
    pub x_box: Vec<(f64, f64)>,
}

impl MetricSpec {
    /// Instantiates the metric model.
    pub fn build(&self) -> Result<MetricModel> {
        match self.kind.as_str() {
            "euclidean" => MetricModel::euclidean(self.n, self.p),
            "sphere-chart" => MetricModel::sphere_chart(self.p),
            "sphere-product-chart" => MetricModel::sphere_product_chart(self.p),
            "randers" => {
                let a = (0..self.n)
                    .map(|i| self.require(&format!("a.{i}"), self.n))
                    .collect::<Result<Vec<_>>>()?;
                let b = self.require("b", self.n)?;
                MetricModel::randers(a, b, self.p)
            }
            k => Err(Error::Scenario(format!("unknown metric.kind `{k}`"))),
        }
    }

    fn require(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        let v = self.params.get(key).ok_or_else(|| {
            Error::Scenario(format!("missing key `metric.params.{key}`"))
        })?;
        if v.len() != len {
            return Err(Error::Scenario(format!(
                "metric.params.{key}: expected {len} numbers, found {}",
                v.len()
            )));
        }
        Ok(v.clone())
    }
}

/// Immersion selection; box entries override the immersion's own parameter
/// box for sampling (and define it outright for the linear kind).
#[derive(Clone, Debug)]
pub struct ImmersionSpec {
    pub kind: String,
    pub m: usize,
    pub params: BTreeMap<String, Vec<f64>>,
    pub boxes: BTreeMap<usize, (f64, f64)>,
}

impl ImmersionSpec {
    /// Instantiates the immersion into an `n`-dimensional ambient chart.
    pub fn build(&self, n: usize) -> Result<Immersion> {
        match self.kind.as_str() {
            "plane" => Immersion::plane(self.m, n),
            "sphere2" => Immersion::sphere2(),
            "graph" => Immersion::graph(),
            "cylinder" => Immersion::cylinder(),
            "linear" => {
                let a = (0..n)
                    .map(|i| {
                        let key = format!("a.{i}");
                        let row = self.params.get(&key).ok_or_else(|| {
                            Error::Scenario(format!("missing key `immersion.params.{key}`"))
                        })?;
                        if row.len() != self.m {
                            return Err(Error::Scenario(format!(
                                "immersion.params.{key}: expected {} numbers, found {}",
                                self.m,
                                row.len()
                            )));
                        }
                        Ok(row.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let u_box = (0..self.m)
                    .map(|i| {
                        self.boxes.get(&i).copied().ok_or_else(|| {
                            Error::Scenario(format!("missing key `immersion.box.{i}`"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Immersion::linear(a, u_box)
            }
            k => Err(Error::Scenario(format!("unknown immersion.kind `{k}`"))),
        }
    }

    /// Sampling box: the immersion's own parameter box with any scenario
    /// overrides applied per axis.
    pub fn sample_box(&self, imm: &Immersion) -> Vec<(f64, f64)> {
        let mut out = imm.u_box().to_vec();
        for (&i, &iv) in &self.boxes {
            if i < out.len() {
                out[i] = iv;
            }
        }
        out
    }
}

/// A parsed, validated run configuration.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub metric: MetricSpec,
    pub immersion: ImmersionSpec,
    /// Sample points per family.
    pub points: usize,
    pub seed: u64,
    /// Per-identity tolerance overrides from `tol.<identity>` keys.
    pub tol_overrides: BTreeMap<String, f64>,
    /// Identity subset selected on the command line; `None` runs everything.
    pub checks: Option<BTreeSet<String>>,
    /// Canonical `key = value` echo of the parsed configuration.
    pub config_lines: Vec<String>,
}

fn scn(name: &str, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Scenario(format!("{name} line {line}: {msg}"))
}

struct Entries<'a> {
    name: &'a str,
    map: BTreeMap<String, (String, usize)>,
}

impl<'a> Entries<'a> {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| scn(self.name, line, format!("`{key}`: malformed number `{v}`"))),
        }
    }

    fn take_usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| scn(self.name, line, format!("`{key}`: malformed count `{v}`"))),
        }
    }

    fn parse_list(&self, key: &str, v: &str, line: usize) -> Result<Vec<f64>> {
        v.split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    scn(self.name, line, format!("`{key}`: malformed number `{tok}`"))
                })
            })
            .collect()
    }

    /// Removes every `prefix.*` key and returns suffix-keyed number lists.
    fn take_params(&mut self, prefix: &str) -> Result<BTreeMap<String, Vec<f64>>> {
        let keys: Vec<String> = self
            .map
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect();
        let mut out = BTreeMap::new();
        for key in keys {
            let (v, line) = self.map.remove(&key).expect("key just listed");
            let list = self.parse_list(&key, &v, line)?;
            out.insert(key[prefix.len()..].to_string(), list);
        }
        Ok(out)
    }

    /// Removes every `prefix.<i>` box key and returns interval overrides.
    fn take_boxes(&mut self, prefix: &str) -> Result<BTreeMap<usize, (f64, f64)>> {
        let keys: Vec<String> = self
            .map
            .keys()
            .filter(|k| k.starts_with(prefix))
            .cloned()
            .collect();
        let mut out = BTreeMap::new();
        for key in keys {
            let (v, line) = self.map.remove(&key).expect("key just listed");
            let axis: usize = key[prefix.len()..].parse().map_err(|_| {
                scn(self.name, line, format!("`{key}`: box axis must be an integer"))
            })?;
            let nums = self.parse_list(&key, &v, line)?;
            if nums.len() != 2 || nums[0] >= nums[1] {
                return Err(scn(
                    self.name,
                    line,
                    format!("`{key}`: expected `lo hi` with lo < hi"),
                ));
            }
            out.insert(axis, (nums[0], nums[1]));
        }
        Ok(out)
    }
}

fn default_x_box(kind: &str, n: usize) -> Vec<(f64, f64)> {
    match kind {
        // Polar-angle charts must stay away from the coordinate poles.
        "sphere-chart" => vec![(0.45, 2.7), (-3.0, 3.0)],
        "sphere-product-chart" => vec![(0.45, 2.7), (-3.0, 3.0), (-1.5, 1.5)],
        _ => vec![(-1.2, 1.2); n],
    }
}

/// Parses scenario text in the line grammar (`dotted.key = value`, `#`
/// comments). Errors carry the scenario name and line number.
pub fn parse_scenario(text: &str, name: &str) -> Result<Scenario> {
    let mut map: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| scn(name, line, "expected `key = value`"))?;
        let key = k.trim().to_string();
        let val = v.trim().to_string();
        if key.is_empty() || val.is_empty() {
            return Err(scn(name, line, "empty key or value"));
        }
        if map.insert(key.clone(), (val, line)).is_some() {
            return Err(scn(name, line, format!("duplicate key `{key}`")));
        }
    }
    let config_lines: Vec<String> = map
        .iter()
        .map(|(k, (v, _))| format!("{k} = {v}"))
        .collect();
    let mut e = Entries { name, map };

    // Metric section.
    let (kind, _) = e
        .take("metric.kind")
        .ok_or_else(|| Error::Scenario(format!("{name}: missing key `metric.kind`")))?;
    let n = match kind.as_str() {
        "sphere-chart" => {
            let n = e.take_usize("metric.n")?.unwrap_or(2);
            if n != 2 {
                return Err(Error::Scenario(format!(
                    "{name}: metric.kind sphere-chart fixes metric.n = 2, found {n}"
                )));
            }
            n
        }
        "sphere-product-chart" => {
            let n = e.take_usize("metric.n")?.unwrap_or(3);
            if n != 3 {
                return Err(Error::Scenario(format!(
                    "{name}: metric.kind sphere-product-chart fixes metric.n = 3, found {n}"
                )));
            }
            n
        }
        "euclidean" | "randers" => e
            .take_usize("metric.n")?
            .ok_or_else(|| Error::Scenario(format!("{name}: missing key `metric.n`")))?,
        k => {
            return Err(Error::Scenario(format!(
                "{name}: unknown metric.kind `{k}` (expected euclidean, sphere-chart, \
                 sphere-product-chart, or randers)"
            )))
        }
    };
    let p = e.take_f64("metric.p")?.unwrap_or(1.0);
    if !(p > 0.0) {
        return Err(Error::Scenario(format!(
            "{name}: metric.p must be positive, found {p}"
        )));
    }
    let m_params = e.take_params("metric.params.")?;
    let mut x_box = default_x_box(&kind, n);
    for (axis, iv) in e.take_boxes("metric.box.")? {
        if axis >= n {
            return Err(Error::Scenario(format!(
                "{name}: metric.box.{axis} out of range for metric.n = {n}"
            )));
        }
        x_box[axis] = iv;
    }
    let metric = MetricSpec { kind, n, p, params: m_params, x_box };

    // Immersion section.
    let (ikind, _) = e
        .take("immersion.kind")
        .ok_or_else(|| Error::Scenario(format!("{name}: missing key `immersion.kind`")))?;
    let m = match ikind.as_str() {
        "sphere2" | "graph" | "cylinder" => {
            if n != 3 {
                return Err(Error::Scenario(format!(
                    "{name}: immersion.kind {ikind} targets a 3-dimensional chart, \
                     found metric.n = {n}"
                )));
            }
            let m = e.take_usize("immersion.m")?.unwrap_or(2);
            if m != 2 {
                return Err(Error::Scenario(format!(
                    "{name}: immersion.kind {ikind} fixes immersion.m = 2, found {m}"
                )));
            }
            m
        }
        "plane" | "linear" => e
            .take_usize("immersion.m")?
            .ok_or_else(|| Error::Scenario(format!("{name}: missing key `immersion.m`")))?,
        k => {
            return Err(Error::Scenario(format!(
                "{name}: unknown immersion.kind `{k}` (expected plane, linear, sphere2, \
                 graph, or cylinder)"
            )))
        }
    };
    if m == 0 || m >= n {
        return Err(Error::Scenario(format!(
            "{name}: immersion.m = {m} must satisfy 0 < m < {n}"
        )));
    }
    let i_params = e.take_params("immersion.params.")?;
    let boxes = e.take_boxes("immersion.box.")?;
    for &axis in boxes.keys() {
        if axis >= m {
            return Err(Error::Scenario(format!(
                "{name}: immersion.box.{axis} out of range for immersion.m = {m}"
            )));
        }
    }
    let immersion = ImmersionSpec { kind: ikind, m, params: i_params, boxes };

    // Run section.
    let points = e.take_usize("run.points")?.unwrap_or(DEFAULT_POINTS);
    let seed = match e.take("run.seed") {
        None => DEFAULT_SEED,
        Some((v, line)) => parse_seed(&v)
            .ok_or_else(|| scn(name, line, format!("`run.seed`: malformed seed `{v}`")))?,
    };

    // Tolerance overrides.
    let tol_keys: Vec<String> = e
        .map
        .keys()
        .filter(|k| k.starts_with("tol."))
        .cloned()
        .collect();
    let mut tol_overrides = BTreeMap::new();
    for key in tol_keys {
        let (v, line) = e.map.remove(&key).expect("key just listed");
        let ident = &key["tol.".len()..];
        if check_named(ident).is_none() {
            return Err(scn(
                name,
                line,
                format!("`{key}`: unknown identity `{ident}` (see list-checks)"),
            ));
        }
        let tol: f64 = v
            .parse()
            .map_err(|_| scn(name, line, format!("`{key}`: malformed number `{v}`")))?;
        if !(tol >= 0.0) {
            return Err(scn(name, line, format!("`{key}`: tolerance must be >= 0")));
        }
        tol_overrides.insert(ident.to_string(), tol);
    }

    if let Some((key, (_, line))) = e.map.iter().next() {
        return Err(scn(name, *line, format!("unknown key `{key}`")));
    }

    // Validate that the configuration actually instantiates.
    let model = metric.build()?;
    let imm = immersion.build(n)?;
    if imm.m() != m || imm.n() != model.dim() {
        return Err(Error::Scenario(format!(
            "{name}: immersion is {}->{} but scenario declares {m}->{n}",
            imm.m(),
            imm.n()
        )));
    }

    Ok(Scenario {
        name: name.to_string(),
        metric,
        immersion,
        points,
        seed,
        tol_overrides,
        checks: None,
        config_lines,
    })
}

/// Parses a seed: hexadecimal with a `0x` prefix, decimal otherwise.
pub fn parse_seed(s: &str) -> Option<u64> {
    if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        s.parse::<u64>().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "metric.kind = euclidean\nmetric.n = 3\nimmersion.kind = plane\nimmersion.m = 2\n";

    #[test]
    fn builtin_scenarios_parse_and_instantiate() {
        for (name, text) in BUILTIN_SCENARIOS {
            let sc = parse_scenario(text, name).expect(name);
            assert_eq!(sc.name, *name);
            assert_eq!(sc.points, 10);
            assert_eq!(sc.seed, DEFAULT_SEED);
            assert!(sc.checks.is_none());
            assert!(!sc.config_lines.is_empty());
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_scenario("metric.kind = euclidean\nmetric.n 3\n", "t").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("key = value"), "{msg}");

        let err = parse_scenario("metric.kind = euclidean\nmetric.kind = randers\n", "t")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("duplicate"), "{msg}");

        let err =
            parse_scenario(&format!("{BASE}bogus.key = 1\n"), "t").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 5") && msg.contains("unknown key `bogus.key`"), "{msg}");

        let err = parse_scenario(&format!("{BASE}metric.p = fast\n"), "t").unwrap_err();
        assert!(err.to_string().contains("malformed number"), "{err}");

        let err = parse_scenario(&format!("{BASE}tol.not-a-check = 1\n"), "t").unwrap_err();
        assert!(err.to_string().contains("unknown identity"), "{err}");

        let err = parse_scenario(&format!("{BASE}metric.box.0 = 3 1\n"), "t").unwrap_err();
        assert!(err.to_string().contains("lo < hi"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = format!("# leading comment\n\n{BASE}run.points = 3 # trailing comment\n");
        let sc = parse_scenario(&text, "t").expect("parses");
        assert_eq!(sc.points, 3);
    }

    #[test]
    fn kind_constraints_are_validated() {
        let err = parse_scenario(
            "metric.kind = sphere-chart\nmetric.n = 3\nimmersion.kind = plane\nimmersion.m = 1\n",
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("fixes metric.n = 2"), "{err}");

        let err = parse_scenario(
            "metric.kind = euclidean\nmetric.n = 3\nimmersion.kind = linear\nimmersion.m = 2\n\
             immersion.params.a.0 = 1 0\nimmersion.params.a.1 = 0 1\nimmersion.params.a.2 = 0 0\n",
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("immersion.box.0"), "{err}");

        let err = parse_scenario(
            "metric.kind = randers\nmetric.n = 3\nmetric.params.a.0 = 1 0 0\n\
             metric.params.a.1 = 0 1 0\nmetric.params.a.2 = 0 0 1\n\
             immersion.kind = graph\n",
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("metric.params.b"), "{err}");

        let err = parse_scenario(
            "metric.kind = euclidean\nmetric.n = 2\nimmersion.kind = plane\nimmersion.m = 2\n",
            "t",
        )
        .unwrap_err();
        assert!(err.to_string().contains("must satisfy"), "{err}");
    }

    #[test]
    fn box_overrides_apply_per_axis() {
        let sc = parse_scenario(
            &format!("{BASE}metric.box.1 = -0.5 0.5\nimmersion.box.0 = 0.1 0.9\n"),
            "t",
        )
        .expect("parses");
        assert_eq!(sc.metric.x_box[0], (-1.2, 1.2));
        assert_eq!(sc.metric.x_box[1], (-0.5, 0.5));
        let imm = sc.immersion.build(sc.metric.n).expect("builds");
        let ub = sc.immersion.sample_box(&imm);
        assert_eq!(ub[0], (0.1, 0.9));
        assert_eq!(ub[1], imm.u_box()[1]);
    }

    #[test]
    fn seed_parsing_accepts_hex_and_decimal() {
        assert_eq!(parse_seed("0x46314E35"), Some(0x4631_4E35));
        assert_eq!(parse_seed("0X10"), Some(16));
        assert_eq!(parse_seed("12345"), Some(12345));
        assert_eq!(parse_seed("0xZZ"), None);
        assert_eq!(parse_seed("twelve"), None);

        let sc = parse_scenario(&format!("{BASE}run.seed = 0xABC\n"), "t").expect("parses");
        assert_eq!(sc.seed, 0xABC);
        let sc = parse_scenario(&format!("{BASE}run.seed = 77\n"), "t").expect("parses");
        assert_eq!(sc.seed, 77);
    }

    #[test]
    fn tolerance_overrides_parse_into_the_map() {
        let sc = parse_scenario(&format!("{BASE}tol.frame.duality = 1e-6\n"), "t")
            .expect("parses");
        assert_eq!(sc.tol_overrides.get("frame.duality"), Some(&1e-6));
    }
}
