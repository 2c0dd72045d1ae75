//! Dense truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`Jet`] stores every partial derivative of a scalar quantity up to a
//! fixed total order, as Taylor coefficients over a shared [`JetSpace`].
//! Arithmetic propagates derivatives exactly (no truncation error below the
//! cap), so higher geometry built on top of it only ever sees roundoff.
//!
//! Two details matter for correctness and are easy to get wrong:
//!
//! * **Validity tracking.** Taking a formal derivative of a jet truncated at
//!   order `k` yields coefficients that are only trustworthy up to order
//!   `k - 1`; the stale tail is zeroed and the `valid` watermark lowered.
//!   Every operation propagates the watermark, and coefficient extraction
//!   asserts against it, so an order-budget bug panics instead of silently
//!   returning garbage.
//! * **Composition semantics.** A jet's variables are formal displacements.
//!   Evaluating a closure on jets whose coefficient patterns encode inner
//!   functions (chain rule) is the supported way to differentiate composite
//!   fields; [`Jet::compose`] additionally lets a privately expanded Taylor
//!   table be re-based onto arbitrary argument jets.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

/// Hard cap on variables per space (packed 4 bits of degree each into a u64).
const MAX_VARS: usize = 16;
/// Hard cap on truncation order (per-variable degree must fit 4 bits).
const MAX_ORDER: usize = 15;

/// Shared coefficient layout for all jets over the same variable set.
///
/// Monomials are enumerated in graded lexicographic order; index 0 is the
/// constant term. Spaces are interned globally, so equality of layouts can be
/// checked by pointer.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    /// Exponent vectors, graded-lex.
    monos: Vec<Box<[u8]>>,
    /// Total degree of each monomial.
    deg: Vec<u8>,
    /// First monomial index of each total degree `0..=order + 1` (sentinel).
    deg_start: Vec<usize>,
    /// Packed exponent vector -> monomial index.
    rank: HashMap<u64, u32>,
    /// Product triples `(i, j, k)` meaning `out[k] += a[i] * b[j]`,
    /// grouped by output degree.
    prod: Vec<Vec<(u32, u32, u32)>>,
}

fn pack(mono: &[u8]) -> u64 {
    debug_assert!(mono.len() <= MAX_VARS);
    let mut key = 0u64;
    for (i, &d) in mono.iter().enumerate() {
        debug_assert!(d as usize <= MAX_ORDER);
        key |= (d as u64) << (4 * i);
    }
    key
}

/// Enumerates exponent vectors of `nvars` variables with total degree `deg`,
/// in lexicographic order (first variable weakest... we recurse on the first
/// slot taking the largest share last reversed to match graded-lex).
fn monos_of_degree(nvars: usize, deg: usize) -> Vec<Vec<u8>> {
    if nvars == 0 {
        return if deg == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    // Lexicographic: higher exponent on the first variable sorts first.
    for first in (0..=deg).rev() {
        for mut rest in monos_of_degree(nvars - 1, deg - first) {
            let mut m = Vec::with_capacity(nvars);
            m.push(first as u8);
            m.append(&mut rest);
            out.push(m);
        }
    }
    out
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> JetSpace {
        assert!(nvars <= MAX_VARS, "jet space supports at most {MAX_VARS} variables");
        assert!(order <= MAX_ORDER, "jet space supports order at most {MAX_ORDER}");
        let mut monos: Vec<Box<[u8]>> = Vec::new();
        let mut deg = Vec::new();
        let mut deg_start = Vec::new();
        for d in 0..=order {
            deg_start.push(monos.len());
            for m in monos_of_degree(nvars, d) {
                monos.push(m.into_boxed_slice());
                deg.push(d as u8);
            }
        }
        deg_start.push(monos.len());
        let rank: HashMap<u64, u32> = monos
            .iter()
            .enumerate()
            .map(|(i, m)| (pack(m), i as u32))
            .collect();
        // Product table: all coefficient pairs whose degrees fit the cap.
        let mut prod: Vec<Vec<(u32, u32, u32)>> = vec![Vec::new(); order + 1];
        let mut scratch = vec![0u8; nvars];
        for i in 0..monos.len() {
            for j in 0..monos.len() {
                let d = (deg[i] + deg[j]) as usize;
                if d > order {
                    continue;
                }
                for v in 0..nvars {
                    scratch[v] = monos[i][v] + monos[j][v];
                }
                let k = rank[&pack(&scratch)];
                prod[d].push((i as u32, j as u32, k));
            }
        }
        JetSpace { nvars, order, monos, deg, deg_start, rank, prod }
    }

    /// Number of variables.
    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Truncation order.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.monos.len()
    }

    /// Monomial index for an exponent vector, if within the cap.
    fn index_of(&self, mono: &[u8]) -> Option<u32> {
        assert_eq!(mono.len(), self.nvars, "exponent vector length mismatch");
        self.rank.get(&pack(mono)).copied()
    }
}

static SPACES: Lazy<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Returns the interned jet space with `nvars` variables truncated at total
/// degree `order`.
pub fn space(nvars: usize, order: usize) -> Arc<JetSpace> {
    let mut map = SPACES.lock().expect("jet space cache poisoned");
    map.entry((nvars, order))
        .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
        .clone()
}

/// Truncated Taylor expansion of a scalar quantity.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    /// Highest total degree whose coefficients are trustworthy. Coefficients
    /// above the watermark are kept at exactly zero.
    valid: usize,
    c: Vec<f64>,
}

impl Jet {
    /// Constant jet (all derivatives zero).
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Jet {
        let mut c = vec![0.0; space.len()];
        c[0] = value;
        Jet { space: space.clone(), valid: space.order, c }
    }

    /// Coordinate jet `value + t_var`: the seed for differentiating with
    /// respect to variable `var`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Jet {
        assert!(var < space.nvars, "variable index out of range");
        let mut j = Jet::constant(space, value);
        if space.order >= 1 {
            let mut mono = vec![0u8; space.nvars];
            mono[var] = 1;
            let idx = space.index_of(&mono).expect("degree-1 monomial in space") as usize;
            j.c[idx] = 1.0;
        }
        j
    }

    /// The underlying space.
    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// Validity watermark: highest total degree with trustworthy coefficients.
    pub fn valid_order(&self) -> usize {
        self.valid
    }

    /// Value part (0th coefficient).
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    fn same_space(&self, other: &Jet) -> &Arc<JetSpace> {
        assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "jet arithmetic across different spaces"
        );
        &self.space
    }

    fn zero_above(&mut self, order: usize) {
        let start = self.space.deg_start[(order + 1).min(self.space.order + 1)];
        for x in &mut self.c[start..] {
            *x = 0.0;
        }
    }

    /// Taylor coefficient of the monomial with the given exponent vector.
    /// Panics if the requested degree exceeds the validity watermark.
    pub fn coeff(&self, mono: &[u8]) -> f64 {
        let d: usize = mono.iter().map(|&x| x as usize).sum();
        assert!(
            d <= self.valid,
            "coefficient of degree {d} requested from a jet valid to order {}",
            self.valid
        );
        let idx = self.space.index_of(mono).expect("monomial outside jet space") as usize;
        self.c[idx]
    }

    /// Partial derivative value `pd^{|mono|} f / pd t^mono` at the expansion
    /// point: the coefficient rescaled by the multinomial factorial.
    pub fn partial(&self, mono: &[u8]) -> f64 {
        let mut fact = 1.0;
        for &e in mono {
            for k in 2..=e as usize {
                fact *= k as f64;
            }
        }
        self.coeff(mono) * fact
    }

    /// Formal derivative with respect to variable `var`. Lowers the validity
    /// watermark by one and zeroes the now-stale tail.
    pub fn deriv(&self, var: usize) -> Jet {
        assert!(var < self.space.nvars, "variable index out of range");
        assert!(
            self.valid >= 1,
            "formal derivative of a jet with exhausted validity (order 0)"
        );
        let sp = &self.space;
        let mut out = vec![0.0; sp.len()];
        let new_valid = self.valid - 1;
        let mut mono = vec![0u8; sp.nvars];
        // out[beta] = (beta_var + 1) * c[beta + e_var] for deg(beta) < valid.
        for i in 0..sp.deg_start[new_valid + 1] {
            mono.copy_from_slice(&sp.monos[i]);
            mono[var] += 1;
            if let Some(src) = sp.index_of(&mono) {
                out[i] = self.c[src as usize] * mono[var] as f64;
            }
        }
        Jet { space: sp.clone(), valid: new_valid, c: out }
    }

    /// Scales by a constant.
    pub fn scale(&self, k: f64) -> Jet {
        let mut out = self.clone();
        for x in &mut out.c {
            *x *= k;
        }
        out
    }

    /// Zeroes every coefficient that involves any of the listed variables.
    /// The result depends only on the remaining variables; validity is kept.
    pub fn without_vars(&self, vars: &[usize]) -> Jet {
        let mut out = self.clone();
        for (i, m) in self.space.monos.iter().enumerate() {
            if vars.iter().any(|&v| m[v] > 0) {
                out.c[i] = 0.0;
            }
        }
        out
    }

    /// Copies the jet into `target` space, renaming variable `i` of the source
    /// to `var_map[i]` of the target. Coefficients beyond the target order are
    /// dropped (lowering the watermark accordingly).
    pub fn transplant(&self, target: &Arc<JetSpace>, var_map: &[usize]) -> Jet {
        assert_eq!(var_map.len(), self.space.nvars, "variable map length mismatch");
        let valid = self.valid.min(target.order);
        let mut out = Jet {
            space: target.clone(),
            valid,
            c: vec![0.0; target.len()],
        };
        let mut mono = vec![0u8; target.nvars];
        for (i, m) in self.space.monos.iter().enumerate() {
            if self.c[i] == 0.0 || self.space.deg[i] as usize > valid {
                continue;
            }
            mono.iter_mut().for_each(|x| *x = 0);
            for (v, &e) in m.iter().enumerate() {
                if e > 0 {
                    mono[var_map[v]] += e;
                }
            }
            let idx = out
                .space
                .index_of(&mono)
                .expect("transplanted monomial outside target order") as usize;
            out.c[idx] = self.c[i];
        }
        out
    }

    /// Composes a privately expanded Taylor table with argument jets.
    ///
    /// `self` must be expanded around the argument values: variable `i` of
    /// `self` is read as `args[i] - args[i].value()`. The result lives in the
    /// arguments' space.
    pub fn compose(&self, args: &[Jet]) -> Jet {
        assert_eq!(args.len(), self.space.nvars, "composition arity mismatch");
        assert!(!args.is_empty(), "composition needs at least one argument");
        let target = args[0].space.clone();
        for a in args {
            a.same_space(&args[0]);
        }
        let mut valid = self.valid.min(target.order);
        for a in args {
            valid = valid.min(a.valid);
        }
        // Nilpotent displacement parts and their powers.
        let nil: Vec<Jet> = args
            .iter()
            .map(|a| {
                let mut n = a.clone();
                n.c[0] = 0.0;
                n
            })
            .collect();
        let mut pows: Vec<Vec<Jet>> = Vec::with_capacity(nil.len());
        for n in &nil {
            let mut p = vec![Jet::constant(&target, 1.0)];
            for k in 1..=valid {
                p.push(&p[k - 1] * n);
            }
            pows.push(p);
        }
        let mut acc = Jet::constant(&target, 0.0);
        for (i, m) in self.space.monos.iter().enumerate() {
            let d = self.space.deg[i] as usize;
            if d > valid || self.c[i] == 0.0 {
                continue;
            }
            let mut term = Jet::constant(&target, self.c[i]);
            for (v, &e) in m.iter().enumerate() {
                if e > 0 {
                    term = &term * &pows[v][e as usize];
                }
            }
            acc = &acc + &term;
        }
        acc.valid = valid;
        acc.zero_above(valid);
        acc
    }

    /// Composes the univariate analytic series `sum_t series[t] * (self - value)^t`.
    /// `series[t]` must be the `t`-th Taylor coefficient of the outer function
    /// at the jet's value.
    fn univariate(&self, series: &[f64]) -> Jet {
        let mut nil = self.clone();
        nil.c[0] = 0.0;
        let mut acc = Jet::constant(&self.space, series[0]);
        let mut pw = Jet::constant(&self.space, 1.0);
        for (t, &ct) in series.iter().enumerate().skip(1) {
            if t > self.valid {
                break;
            }
            pw = &pw * &nil;
            acc = &acc + &pw.scale(ct);
        }
        acc.valid = self.valid;
        acc.zero_above(acc.valid);
        acc
    }

    /// Multiplicative inverse. Panics at a zero value part.
    pub fn recip(&self) -> Jet {
        let v = self.value();
        assert!(v != 0.0 && v.is_finite(), "reciprocal of a jet with value {v}");
        let mut series = Vec::with_capacity(self.valid + 1);
        let mut c = 1.0 / v;
        for _ in 0..=self.valid {
            series.push(c);
            c *= -1.0 / v;
        }
        self.univariate(&series)
    }

    /// Square root. Panics unless the value part is strictly positive.
    pub fn sqrt(&self) -> Jet {
        let v = self.value();
        assert!(v > 0.0, "square root of a jet with value {v}");
        let r = v.sqrt();
        // d^t/dx^t sqrt(x) / t! = r * prod_{s<t}(1/2 - s) / (t! v^t)
        let mut series = Vec::with_capacity(self.valid + 1);
        let mut c = r;
        series.push(c);
        for t in 1..=self.valid {
            c *= (1.5 - t as f64) / (t as f64 * v);
            series.push(c);
        }
        self.univariate(&series)
    }

    /// Natural exponential.
    pub fn exp(&self) -> Jet {
        let mut series = Vec::with_capacity(self.valid + 1);
        let mut c = self.value().exp();
        for t in 0..=self.valid {
            if t > 0 {
                c /= t as f64;
            }
            series.push(c);
        }
        self.univariate(&series)
    }

    /// Natural logarithm. Panics unless the value part is strictly positive.
    pub fn ln(&self) -> Jet {
        let v = self.value();
        assert!(v > 0.0, "logarithm of a jet with value {v}");
        let mut series = Vec::with_capacity(self.valid + 1);
        series.push(v.ln());
        let mut c = 1.0;
        for t in 1..=self.valid {
            c *= -1.0 / v;
            // c now holds (-1)^t / v^t; coefficient is -c / t adjusted sign:
            series.push(-c / t as f64);
        }
        self.univariate(&series)
    }

    /// Sine.
    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let mut series = Vec::with_capacity(self.valid + 1);
        let mut fact = 1.0;
        for t in 0..=self.valid {
            if t > 0 {
                fact *= t as f64;
            }
            series.push(cycle[t % 4] / fact);
        }
        self.univariate(&series)
    }

    /// Cosine.
    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let mut series = Vec::with_capacity(self.valid + 1);
        let mut fact = 1.0;
        for t in 0..=self.valid {
            if t > 0 {
                fact *= t as f64;
            }
            series.push(cycle[t % 4] / fact);
        }
        self.univariate(&series)
    }

    /// Integer power by repeated multiplication (exponent >= 0).
    pub fn powi(&self, k: u32) -> Jet {
        let mut acc = Jet::constant(&self.space, 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.same_space(rhs);
        let valid = self.valid.min(rhs.valid);
        let mut out = self.clone();
        for (o, r) in out.c.iter_mut().zip(&rhs.c) {
            *o += r;
        }
        out.valid = valid;
        out.zero_above(valid);
        out
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.same_space(rhs);
        let valid = self.valid.min(rhs.valid);
        let mut out = self.clone();
        for (o, r) in out.c.iter_mut().zip(&rhs.c) {
            *o -= r;
        }
        out.valid = valid;
        out.zero_above(valid);
        out
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let sp = self.same_space(rhs).clone();
        let valid = self.valid.min(rhs.valid);
        let mut c = vec![0.0; sp.len()];
        for d in 0..=valid {
            for &(i, j, k) in &sp.prod[d] {
                let a = self.c[i as usize];
                if a != 0.0 {
                    c[k as usize] += a * rhs.c[j as usize];
                }
            }
        }
        Jet { space: sp, valid, c }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Division via reciprocal composition.
impl std::ops::Div for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Tiny exact polynomial oracle: terms `(coeff, exponents)` over up to
    /// three variables, degree <= 4. Evaluation and differentiation are
    /// straightforward enough to trust by inspection.
    #[derive(Clone, Debug)]
    struct Poly(Vec<(f64, [u8; 3])>);

    impl Poly {
        fn eval(&self, p: &[f64; 3]) -> f64 {
            self.0
                .iter()
                .map(|(c, e)| {
                    c * p[0].powi(e[0] as i32)
                        * p[1].powi(e[1] as i32)
                        * p[2].powi(e[2] as i32)
                })
                .sum()
        }

        fn deriv(&self, var: usize) -> Poly {
            Poly(
                self.0
                    .iter()
                    .filter(|(_, e)| e[var] > 0)
                    .map(|(c, e)| {
                        let mut e2 = *e;
                        e2[var] -= 1;
                        (c * e[var] as f64, e2)
                    })
                    .collect(),
            )
        }

        fn eval_jet(&self, sp: &Arc<JetSpace>, p: &[f64; 3]) -> Jet {
            let vars: Vec<Jet> = (0..3).map(|i| Jet::variable(sp, i, p[i])).collect();
            let mut acc = Jet::constant(sp, 0.0);
            for (c, e) in &self.0 {
                let mut term = Jet::constant(sp, *c);
                for v in 0..3 {
                    for _ in 0..e[v] {
                        term = &term * &vars[v];
                    }
                }
                acc = &acc + &term;
            }
            acc
        }
    }

    fn poly_strategy() -> impl Strategy<Value = Poly> {
        let term = (
            -1.5f64..1.5,
            (0u8..=2, 0u8..=2, 0u8..=2).prop_filter("degree cap", |(a, b, c)| a + b + c <= 4),
        )
            .prop_map(|(c, (a, b, d))| (c, [a, b, d]));
        prop::collection::vec(term, 1..6).prop_map(Poly)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// Jet arithmetic must reproduce every mixed partial of an exact
        /// polynomial to roundoff: the jet pipeline (variable seeds, products,
        /// sums) against symbolic differentiation of the same polynomial.
        #[test]
        fn jet_matches_polynomial_oracle(
            poly in poly_strategy(),
            px in -2.0f64..2.0,
            py in -2.0f64..2.0,
            pz in -2.0f64..2.0,
            mi in prop::collection::vec(0usize..3, 0..=4),
        ) {
            let sp = space(3, 4);
            let point = [px, py, pz];
            let jet = poly.eval_jet(&sp, &point);
            let mut sym = poly.clone();
            let mut mono = [0u8; 3];
            for &v in &mi {
                sym = sym.deriv(v);
                mono[v] += 1;
            }
            let want = sym.eval(&point);
            let got = jet.partial(&mono);
            // Exact arithmetic on both paths: only roundoff separates them.
            let scale = 1.0 + want.abs();
            prop_assert!(
                (got - want).abs() <= 1e-12 * scale,
                "partial {:?}: jet {} vs oracle {}", mono, got, want
            );
        }
    }

    #[test]
    fn variable_and_constant_seed_the_expected_coefficients() {
        let sp = space(2, 3);
        let x = Jet::variable(&sp, 0, 2.5);
        assert_eq!(x.value(), 2.5);
        assert_eq!(x.partial(&[1, 0]), 1.0);
        assert_eq!(x.partial(&[0, 1]), 0.0);
        assert_eq!(x.partial(&[2, 0]), 0.0);
        let c = Jet::constant(&sp, -3.0);
        assert_eq!(c.value(), -3.0);
        assert_eq!(c.partial(&[1, 0]), 0.0);
    }

    #[test]
    fn product_rule_and_chain_rule_on_transcendentals() {
        // f(x, y) = exp(x y): pd_x pd_y f at (0, 1/2) = exp(0)*(1 + 0) = 1.
        let sp = space(2, 4);
        let x = Jet::variable(&sp, 0, 0.0);
        let y = Jet::variable(&sp, 1, 0.5);
        let f = (&x * &y).exp();
        assert!((f.partial(&[1, 1]) - 1.0).abs() < 1e-14);
        // pd_x f = y exp(xy) = 0.5 at the point.
        assert!((f.partial(&[1, 0]) - 0.5).abs() < 1e-14);

        // g(y1, y2) = sqrt(y1^2 + y2^2): pd_{y1} g at (3, 4) = 3/5.
        let y1 = Jet::variable(&sp, 0, 3.0);
        let y2 = Jet::variable(&sp, 1, 4.0);
        let g = (&(&y1 * &y1) + &(&y2 * &y2)).sqrt();
        assert!((g.value() - 5.0).abs() < 1e-14);
        assert!((g.partial(&[1, 0]) - 0.6).abs() < 1e-14);
    }

    #[test]
    fn division_ln_trig_against_hand_values() {
        let sp = space(1, 4);
        let x = Jet::variable(&sp, 0, 0.7);
        // d/dx (1/x) = -1/x^2, d2/dx2 = 2/x^3.
        let r = x.recip();
        assert!((r.value() - 1.0 / 0.7).abs() < 1e-14);
        assert!((r.partial(&[1]) + 1.0 / (0.7f64.powi(2))).abs() < 1e-13);
        assert!((r.partial(&[2]) - 2.0 / (0.7f64.powi(3))).abs() < 1e-12);
        // ln: d3/dx3 ln x = 2/x^3.
        let l = x.ln();
        assert!((l.partial(&[3]) - 2.0 / 0.7f64.powi(3)).abs() < 1e-12);
        // sin/cos consistency: (sin x)' = cos x to 3rd order.
        let s = x.sin();
        let c = x.cos();
        for k in 0..=3usize {
            let mono = [k as u8 + 1];
            let lhs = s.partial(&mono);
            let rhs = c.partial(&[k as u8]);
            assert!((lhs - rhs).abs() < 1e-12, "order {k}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn validity_watermark_tracks_derivatives() {
        let sp = space(2, 4);
        let x = Jet::variable(&sp, 0, 1.0);
        let f = x.powi(4);
        assert_eq!(f.valid_order(), 4);
        let d = f.deriv(0);
        assert_eq!(d.valid_order(), 3);
        assert!((d.partial(&[3, 0]) - 24.0).abs() < 1e-12);
        let dd = d.deriv(0).deriv(0).deriv(0);
        assert_eq!(dd.valid_order(), 0);
        assert!((dd.value() - 24.0).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "valid to order")]
    fn stale_coefficients_are_refused() {
        let sp = space(1, 4);
        let f = Jet::variable(&sp, 0, 2.0).powi(3).deriv(0);
        // f is valid to order 3 only; degree-4 extraction must panic.
        let _ = f.coeff(&[4]);
    }

    #[test]
    fn mixed_partials_commute_exactly() {
        let sp = space(3, 4);
        let x = Jet::variable(&sp, 0, 0.3);
        let y = Jet::variable(&sp, 1, -1.2);
        let z = Jet::variable(&sp, 2, 0.9);
        let f = &(&(&x * &y) * &z.sin()) + &(&x * &x).exp();
        let a = f.deriv(0).deriv(1).deriv(2).value();
        let b = f.deriv(2).deriv(0).deriv(1).value();
        let c = f.partial(&[1, 1, 1]);
        assert_eq!(a, b, "formal derivatives read the same coefficient");
        assert!((a - c).abs() < 1e-13);
    }

    #[test]
    fn compose_rebases_a_private_expansion() {
        // phi(t) = t^2 expanded privately at t0 = u^2 with u = 1.5 + probe:
        // composition must equal u^4 as a jet.
        let small = space(1, 4);
        let big = space(1, 4);
        let u = Jet::variable(&big, 0, 1.5);
        let t0 = (&u * &u).value();
        let t = Jet::variable(&small, 0, t0);
        let phi = &t * &t;
        let composed = phi.compose(&[&u * &u]);
        let direct = u.powi(4);
        for k in 0..=4u8 {
            assert!(
                (composed.partial(&[k]) - direct.partial(&[k])).abs() < 1e-10,
                "degree {k}"
            );
        }
    }

    #[test]
    fn transplant_renames_variables() {
        let small = space(2, 3);
        let big = space(4, 3);
        let a = Jet::variable(&small, 0, 1.0);
        let b = Jet::variable(&small, 1, 2.0);
        let f = &(&a * &b) + &a.powi(2);
        let g = f.transplant(&big, &[3, 1]);
        assert_eq!(g.value(), f.value());
        let mut m = [0u8; 4];
        m[3] = 1;
        m[1] = 1;
        assert_eq!(g.partial(&m), f.partial(&[1, 1]));
    }

    #[test]
    fn without_vars_freezes_probe_directions() {
        let sp = space(3, 3);
        let x = Jet::variable(&sp, 0, 1.0);
        let e = Jet::variable(&sp, 2, 0.0);
        let f = &(&x + &e) * &(&x + &e);
        let frozen = f.without_vars(&[2]);
        assert_eq!(frozen.partial(&[0, 0, 1]), 0.0);
        assert_eq!(frozen.partial(&[1, 0, 0]), f.partial(&[1, 0, 0]));
    }
}
