//! Scalar fields on a chart of a slit tangent bundle.
//!
//! A [`ScalarField`] is a closure evaluating `f(x, y)` on jets. Because the
//! closure runs on jet arithmetic, one evaluation at seeded inputs yields all
//! mixed partials at once, and evaluating at jets whose coefficients encode an
//! inner map differentiates the composite (chain rule for free). Closures must
//! be built from [`Jet`](crate::jet::Jet) operations only; branching on value
//! parts is fine as long as the branch is locally constant.

use std::sync::Arc;

use crate::jet::{self, Jet, JetSpace};

/// Maximum total derivative order served by [`partial`] and [`fd_partial`].
pub const MAX_PARTIAL_ORDER: usize = 4;

/// A scalar function of a base point `x` (length `n_x`) and a fiber point `y`
/// (length `n_y`), evaluable on jets.
#[derive(Clone)]
pub struct ScalarField {
    n_x: usize,
    n_y: usize,
    f: Arc<dyn Fn(&[Jet], &[Jet]) -> Jet + Send + Sync>,
}

impl ScalarField {
    /// Wraps a jet-level closure with the given argument arities.
    pub fn new(
        n_x: usize,
        n_y: usize,
        f: impl Fn(&[Jet], &[Jet]) -> Jet + Send + Sync + 'static,
    ) -> ScalarField {
        ScalarField { n_x, n_y, f: Arc::new(f) }
    }

    /// Base-point arity.
    pub fn n_x(&self) -> usize {
        self.n_x
    }

    /// Fiber arity.
    pub fn n_y(&self) -> usize {
        self.n_y
    }

    /// Evaluates on jets. Panics if the argument counts do not match.
    pub fn eval(&self, x: &[Jet], y: &[Jet]) -> Jet {
        assert_eq!(x.len(), self.n_x, "base argument arity mismatch");
        assert_eq!(y.len(), self.n_y, "fiber argument arity mismatch");
        (self.f)(x, y)
    }

    /// Plain value at a point, via a trivial (order-0) jet space.
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let sp = jet::space(0, 0);
        let xj: Vec<Jet> = x.iter().map(|&v| Jet::constant(&sp, v)).collect();
        let yj: Vec<Jet> = y.iter().map(|&v| Jet::constant(&sp, v)).collect();
        self.eval(&xj, &yj).value()
    }
}

/// Seeds jets for the slots listed in `active` (indices into the combined
/// `(x, y)` slot list, `0..n_x` for base, `n_x..n_x+n_y` for fiber), leaving
/// all other slots constant.
fn seeded_args(
    field: &ScalarField,
    sp: &Arc<JetSpace>,
    x: &[f64],
    y: &[f64],
    active: &[usize],
) -> (Vec<Jet>, Vec<Jet>) {
    let var_of = |slot: usize| active.iter().position(|&s| s == slot);
    let xj: Vec<Jet> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| match var_of(i) {
            Some(var) => Jet::variable(sp, var, v),
            None => Jet::constant(sp, v),
        })
        .collect();
    let yj: Vec<Jet> = y
        .iter()
        .enumerate()
        .map(|(i, &v)| match var_of(field.n_x + i) {
            Some(var) => Jet::variable(sp, var, v),
            None => Jet::constant(sp, v),
        })
        .collect();
    (xj, yj)
}

/// Validates a multi-index (a list of combined `(x, y)` slot indices, with
/// repetition) and returns its distinct slots.
fn check_multi_index(field: &ScalarField, mi: &[usize]) -> Vec<usize> {
    assert!(
        mi.len() <= MAX_PARTIAL_ORDER,
        "derivative order {} exceeds the supported cap {MAX_PARTIAL_ORDER}",
        mi.len()
    );
    let nslots = field.n_x + field.n_y;
    let mut active: Vec<usize> = Vec::new();
    for &s in mi {
        assert!(s < nslots, "slot {s} out of range for {nslots} arguments");
        if !active.contains(&s) {
            active.push(s);
        }
    }
    active.sort_unstable();
    active
}

/// Mixed partial derivative of a field at a point, by jet evaluation.
///
/// `mi` lists differentiation slots with repetition: slot `i < n_x` is
/// `x^i`, slot `n_x + j` is `y^j`. Only the distinct slots of `mi` are
/// seeded as jet variables, so the jet space stays as small as possible.
pub fn partial(field: &ScalarField, x: &[f64], y: &[f64], mi: &[usize]) -> f64 {
    if mi.is_empty() {
        return field.value(x, y);
    }
    let active = check_multi_index(field, mi);
    let sp = jet::space(active.len(), mi.len());
    let (xj, yj) = seeded_args(field, &sp, x, y, &active);
    let jet = field.eval(&xj, &yj);
    let mut mono = vec![0u8; active.len()];
    for &s in mi {
        let var = active.iter().position(|&a| a == s).expect("slot in active set");
        mono[var] += 1;
    }
    jet.partial(&mono)
}

/// Step size for the `k`-th order central difference on a coordinate of the
/// given magnitude: machine epsilon to the power `1/(k + 2)`, scaled.
fn fd_step(order: usize, coord: f64) -> f64 {
    f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * (1.0 + coord.abs())
}

fn fd_recurse(field: &ScalarField, x: &[f64], y: &[f64], mi: &[usize], step: f64) -> f64 {
    match mi.split_first() {
        None => field.value(x, y),
        Some((&slot, rest)) => {
            let mut xp = x.to_vec();
            let mut yp = y.to_vec();
            let mut xm = x.to_vec();
            let mut ym = y.to_vec();
            if slot < field.n_x {
                xp[slot] += step;
                xm[slot] -= step;
            } else {
                yp[slot - field.n_x] += step;
                ym[slot - field.n_x] -= step;
            }
            let fp = fd_recurse(field, &xp, &yp, rest, step);
            let fm = fd_recurse(field, &xm, &ym, rest, step);
            (fp - fm) / (2.0 * step)
        }
    }
}

/// Mixed partial derivative by nested central differences.
///
/// Deliberately independent of the jet pipeline: it only ever calls the field
/// at plain points. Accuracy degrades with order; callers should use
/// [`fd_tolerance`] when comparing against exact derivatives.
pub fn fd_partial(field: &ScalarField, x: &[f64], y: &[f64], mi: &[usize]) -> f64 {
    if mi.is_empty() {
        return field.value(x, y);
    }
    check_multi_index(field, mi);
    let scale = x
        .iter()
        .chain(y.iter())
        .fold(0.0f64, |acc, &c| acc.max(c.abs()));
    let step = fd_step(mi.len(), scale);
    fd_recurse(field, x, y, mi, step)
}

/// Relative tolerance expected of [`fd_partial`] against an exact value, by
/// derivative order.
pub fn fd_tolerance(order: usize) -> f64 {
    match order {
        0 => 1e-14,
        1 => 1e-8,
        2 => 1e-6,
        3 => 1e-4,
        _ => 1e-3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euclidean_norm() -> ScalarField {
        ScalarField::new(0, 2, |_, y| {
            (&(&y[0] * &y[0]) + &(&y[1] * &y[1])).sqrt()
        })
    }

    fn exp_xy() -> ScalarField {
        ScalarField::new(1, 1, |x, y| (&x[0] * &y[0]).exp())
    }

    #[test]
    fn fd_partial_matches_hand_value_for_the_norm() {
        // pd ||y|| / pd y^1 at y = (3, 4) is 3/5 = 0.6.
        let f = euclidean_norm();
        let got = fd_partial(&f, &[], &[3.0, 4.0], &[0]);
        assert!((got - 0.6).abs() < 1e-9, "fd gave {got}");
        let exact = partial(&f, &[], &[3.0, 4.0], &[0]);
        assert!((exact - 0.6).abs() < 1e-14, "jet gave {exact}");
    }

    #[test]
    fn mixed_partial_matches_hand_value_for_exp() {
        // pd^2 exp(x y) / pd x pd y at (0, 1/2) = (1 + x y) exp(x y) = 1.
        let f = exp_xy();
        let exact = partial(&f, &[0.0], &[0.5], &[0, 1]);
        assert!((exact - 1.0).abs() < 1e-13, "jet gave {exact}");
        let fd = fd_partial(&f, &[0.0], &[0.5], &[0, 1]);
        assert!((fd - 1.0).abs() < fd_tolerance(2), "fd gave {fd}");
    }

    #[test]
    fn fd_and_jets_agree_through_fourth_order() {
        let f = ScalarField::new(2, 1, |x, y| {
            let s = &(&x[0] * &x[1]) + &y[0].powi(2);
            &s.sin() + &(&x[0] * &y[0].cos())
        });
        let x = [0.4, -0.8];
        let y = [1.1];
        let cases: [&[usize]; 6] = [
            &[0],
            &[2],
            &[0, 1],
            &[2, 2],
            &[0, 1, 2],
            &[0, 0, 2, 2],
        ];
        for mi in cases {
            let exact = partial(&f, &x, &y, mi);
            let approx = fd_partial(&f, &x, &y, mi);
            let tol = fd_tolerance(mi.len()) * (1.0 + exact.abs());
            assert!(
                (exact - approx).abs() <= tol,
                "mi {:?}: jet {} fd {} tol {}",
                mi,
                exact,
                approx,
                tol
            );
        }
    }

    #[test]
    fn fd_nesting_order_is_immaterial_within_tolerance() {
        let f = exp_xy();
        let a = fd_partial(&f, &[0.2], &[0.7], &[0, 1]);
        let b = fd_partial(&f, &[0.2], &[0.7], &[1, 0]);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    #[should_panic(expected = "exceeds the supported cap")]
    fn order_five_is_refused() {
        let f = exp_xy();
        let _ = partial(&f, &[0.0], &[1.0], &[0, 0, 0, 0, 0]);
    }
}
