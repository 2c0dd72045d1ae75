//! Small dense linear algebra over jets and plain floats.
//!
//! Dimensions here are chart dimensions (2 to 4), so everything is naive
//! nested-`Vec` code tuned for readability against the index formulas in
//! [`ambient`](crate::ambient) and [`submanifold`](crate::submanifold).
//!
//! [`invert_f64`] intentionally duplicates [`invert`] on plain floats: the
//! finite-difference oracle routes must not share arithmetic with the jet
//! pipeline they check.

use crate::jet::{Jet, JetSpace};
use std::sync::Arc;

/// Matrix of jets, row major.
pub type JMat = Vec<Vec<Jet>>;

/// Builds a jet vector from an index closure.
pub fn jvec(n: usize, f: impl Fn(usize) -> Jet) -> Vec<Jet> {
    (0..n).map(f).collect()
}

/// Builds a jet matrix from an index closure.
pub fn jmat(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Jet) -> JMat {
    (0..rows).map(|i| (0..cols).map(|j| f(i, j)).collect()).collect()
}

/// Builds a rank-3 jet array from an index closure.
pub fn jcube(
    n1: usize,
    n2: usize,
    n3: usize,
    f: impl Fn(usize, usize, usize) -> Jet,
) -> Vec<Vec<Vec<Jet>>> {
    (0..n1)
        .map(|i| (0..n2).map(|j| (0..n3).map(|k| f(i, j, k)).collect()).collect())
        .collect()
}

/// Matrix product of jet matrices.
pub fn mat_mul(a: &JMat, b: &JMat) -> JMat {
    let (r, inner, c) = (a.len(), b.len(), b[0].len());
    assert!(a.iter().all(|row| row.len() == inner), "matrix shape mismatch");
    jmat(r, c, |i, j| {
        let mut acc = &a[i][0] * &b[0][j];
        for k in 1..inner {
            acc = &acc + &(&a[i][k] * &b[k][j]);
        }
        acc
    })
}

/// Matrix-vector product.
pub fn mat_vec(a: &JMat, v: &[Jet]) -> Vec<Jet> {
    jvec(a.len(), |i| {
        let mut acc = &a[i][0] * &v[0];
        for k in 1..v.len() {
            acc = &acc + &(&a[i][k] * &v[k]);
        }
        acc
    })
}

/// Transpose.
pub fn transpose(a: &JMat) -> JMat {
    jmat(a[0].len(), a.len(), |i, j| a[j][i].clone())
}

/// Inverse of a square jet matrix by Gauss-Jordan elimination with partial
/// pivoting on value parts; also returns the determinant's value part.
///
/// The pivot choice is a locally constant function of the matrix values, so
/// the derivative coefficients of the result are the true derivatives of the
/// inverse wherever the values keep the same pivot pattern.
pub fn invert(a: &JMat) -> (JMat, f64) {
    let n = a.len();
    assert!(a.iter().all(|row| row.len() == n), "inverse of a non-square matrix");
    let sp: Arc<JetSpace> = a[0][0].space().clone();
    let mut work: Vec<Vec<Jet>> = a.to_vec();
    let mut inv = jmat(n, n, |i, j| Jet::constant(&sp, if i == j { 1.0 } else { 0.0 }));
    let mut det = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                work[i][col]
                    .value()
                    .abs()
                    .total_cmp(&work[j][col].value().abs())
            })
            .expect("nonempty pivot range");
        if pivot_row != col {
            work.swap(pivot_row, col);
            inv.swap(pivot_row, col);
            det = -det;
        }
        let pivot = work[col][col].clone();
        det *= pivot.value();
        let pivot_inv = pivot.recip();
        for j in 0..n {
            work[col][j] = &work[col][j] * &pivot_inv;
            inv[col][j] = &inv[col][j] * &pivot_inv;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            // Eliminate even when the value part is zero: derivative parts
            // of the entry still contribute to the inverse.
            let factor = work[i][col].clone();
            for j in 0..n {
                work[i][j] = &work[i][j] - &(&factor * &work[col][j]);
                inv[i][j] = &inv[i][j] - &(&factor * &inv[col][j]);
            }
        }
    }
    (inv, det)
}

/// Plain-float Gauss-Jordan inverse, reserved for oracle routes.
pub fn invert_f64(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut work: Vec<Vec<f64>> = a.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| work[i][col].abs().total_cmp(&work[j][col].abs()))
            .expect("nonempty pivot range");
        work.swap(pivot_row, col);
        inv.swap(pivot_row, col);
        let p = work[col][col];
        assert!(p.abs() > 1e-14, "singular matrix in oracle inverse");
        for j in 0..n {
            work[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = work[i][col];
            for j in 0..n {
                work[i][j] -= f * work[col][j];
                inv[i][j] -= f * inv[col][j];
            }
        }
    }
    inv
}

/// Flat row-major tensor of jets with runtime rank.
#[derive(Clone)]
pub struct JetTensor {
    pub dims: Vec<usize>,
    pub data: Vec<Jet>,
}

impl JetTensor {
    /// Builds from an index closure; indices iterate row-major.
    pub fn from_fn(dims: Vec<usize>, f: impl FnMut(&[usize]) -> Jet) -> JetTensor {
        let mut f = f;
        let len: usize = dims.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..len {
            data.push(f(&idx));
            for axis in (0..dims.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < dims[axis] {
                    break;
                }
                idx[axis] = 0;
            }
        }
        JetTensor { dims, data }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (axis, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[axis]);
            off = off * self.dims[axis] + i;
        }
        off
    }

    /// Entry at a multi-index.
    pub fn get(&self, idx: &[usize]) -> &Jet {
        &self.data[self.offset(idx)]
    }
}

/// Flat row-major tensor of floats with runtime rank.
#[derive(Clone, Debug)]
pub struct FloatTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl FloatTensor {
    pub fn zeros(dims: Vec<usize>) -> FloatTensor {
        let len = dims.iter().product();
        FloatTensor { dims, data: vec![0.0; len] }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        for (axis, &i) in idx.iter().enumerate() {
            debug_assert!(i < self.dims[axis]);
            off = off * self.dims[axis] + i;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Largest absolute value in an arbitrarily nested float structure.
pub trait MaxAbs {
    fn max_abs(&self) -> f64;
}

impl MaxAbs for f64 {
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl<T: MaxAbs> MaxAbs for Vec<T> {
    fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |acc, t| acc.max(t.max_abs()))
    }
}

/// Extracts value parts of a jet matrix.
pub fn values2(a: &JMat) -> Vec<Vec<f64>> {
    a.iter().map(|row| row.iter().map(Jet::value).collect()).collect()
}

/// Extracts value parts of a rank-3 jet array.
pub fn values3(a: &[Vec<Vec<Jet>>]) -> Vec<Vec<Vec<f64>>> {
    a.iter().map(|m| values2(m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{self, Jet};

    #[test]
    fn jet_inverse_reproduces_derivative_of_inverse() {
        // A(t) = [[1 + t, t], [0, 2]]: A^{-1} = [[1/(1+t), -t/(2(1+t))], [0, 1/2]],
        // d/dt A^{-1}(0) = [[-1, -1/2], [0, 0]].
        let sp = jet::space(1, 3);
        let t = Jet::variable(&sp, 0, 0.0);
        let one = Jet::constant(&sp, 1.0);
        let a = vec![
            vec![&one + &t, t.clone()],
            vec![Jet::constant(&sp, 0.0), Jet::constant(&sp, 2.0)],
        ];
        let (inv, det) = invert(&a);
        assert!((det - 2.0).abs() < 1e-14);
        assert!((inv[0][0].value() - 1.0).abs() < 1e-14);
        assert!((inv[0][0].partial(&[1]) + 1.0).abs() < 1e-13);
        assert!((inv[0][1].partial(&[1]) + 0.5).abs() < 1e-13);
        assert!((inv[1][0].partial(&[1])).abs() < 1e-13);
        // A * A^{-1} = I including derivative parts.
        let prod = mat_mul(&a, &inv);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i][j].value() - want).abs() < 1e-14);
                assert!(prod[i][j].partial(&[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn float_inverse_matches_jet_inverse_values() {
        let sp = jet::space(0, 0);
        let vals = vec![
            vec![2.0, 0.3, -0.1],
            vec![0.3, 1.5, 0.2],
            vec![-0.1, 0.2, 0.9],
        ];
        let a = jmat(3, 3, |i, j| Jet::constant(&sp, vals[i][j]));
        let (jinv, _) = invert(&a);
        let finv = invert_f64(&vals);
        for i in 0..3 {
            for j in 0..3 {
                assert!((jinv[i][j].value() - finv[i][j]).abs() < 1e-12);
            }
        }
    }
}
