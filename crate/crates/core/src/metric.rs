//! Metric models on a chart: the energy function `F^2(x, y)`, its fundamental
//! tensor, and the homogeneous lift.
//!
//! A [`MetricModel`] owns the energy function as a jet-evaluable
//! [`ScalarField`] plus the constants and metadata the rest of the crate
//! needs. Points on the slit bundle are validated at construction
//! ([`MetricModel::point`]): the fiber direction must keep away from the null
//! section and the fundamental tensor must be numerically invertible there.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::jet::{self, Jet};
use crate::linalg;

/// Reject fiber directions with `|y|^2` below this.
pub const EPS_NULL: f64 = 1e-6;
/// Reject points where `|det g|` falls below this.
pub const EPS_DET: f64 = 1e-12;

/// Which family a model belongs to; drives which classical reductions apply.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// Flat Euclidean chart.
    Euclidean,
    /// Quadratic energy from a chart-dependent symmetric matrix.
    Riemannian,
    /// Norm-plus-linear-form energy with constant coefficients.
    Randers,
    /// User-supplied energy function.
    Custom,
}

/// A chart-matrix closure `x -> g_ij(x)` usable both on floats (independent
/// oracle routes) and when building the energy function.
type ChartF64 = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;

/// A metric structure on an `n`-dimensional chart together with the constant
/// `p > 0` entering the homogeneous lift of the fiber metric.
#[derive(Clone)]
pub struct MetricModel {
    n: usize,
    p: f64,
    kind: MetricKind,
    label: String,
    f2: ScalarField,
    chart_f64: Option<ChartF64>,
}

/// A validated point of the slit bundle chart.
#[derive(Clone, Debug)]
pub struct AmbientPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Metric data at a point: base metric, its inverse, the lifted fiber metric
/// and its inverse, plus the scalars everything is built from.
#[derive(Clone, Debug)]
pub struct MetricAtPoint {
    pub g: Vec<Vec<f64>>,
    pub g_inv: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub h_inv: Vec<Vec<f64>>,
    /// `g_ab y^a y^b`, equal to `F^2` by homogeneity.
    pub norm_sq: f64,
    pub f2: f64,
    pub det_g: f64,
}

impl MetricModel {
    /// Flat chart: `F^2 = sum_a (y^a)^2`.
    pub fn euclidean(n: usize, p: f64) -> Result<MetricModel> {
        let chart: ChartF64 = Arc::new(move |_x: &[f64]| identity(n));
        let mut m = Self::riemannian(n, p, "euclidean", chart, move |x| {
            let sp = x[0].space().clone();
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| Jet::constant(&sp, if i == j { 1.0 } else { 0.0 }))
                        .collect()
                })
                .collect()
        })?;
        m.kind = MetricKind::Euclidean;
        Ok(m)
    }

    /// Two-dimensional round-sphere chart `diag(1, sin^2 x^1)`.
    pub fn sphere_chart(p: f64) -> Result<MetricModel> {
        let chart: ChartF64 = Arc::new(|x: &[f64]| {
            let s = x[0].sin();
            vec![vec![1.0, 0.0], vec![0.0, s * s]]
        });
        Self::riemannian(2, p, "sphere-chart", chart, |x| {
            let sp = x[0].space().clone();
            let zero = Jet::constant(&sp, 0.0);
            let s = x[0].sin();
            vec![
                vec![Jet::constant(&sp, 1.0), zero.clone()],
                vec![zero, &s * &s],
            ]
        })
    }

    /// Product chart `diag(1, sin^2 x^1, 1)`: a round sphere times a line.
    pub fn sphere_product_chart(p: f64) -> Result<MetricModel> {
        let chart: ChartF64 = Arc::new(|x: &[f64]| {
            let s = x[0].sin();
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, s * s, 0.0],
                vec![0.0, 0.0, 1.0],
            ]
        });
        Self::riemannian(3, p, "sphere-product-chart", chart, |x| {
            let sp = x[0].space().clone();
            let z = || Jet::constant(&sp, 0.0);
            let one = || Jet::constant(&sp, 1.0);
            let s = x[0].sin();
            vec![
                vec![one(), z(), z()],
                vec![z(), &s * &s, z()],
                vec![z(), z(), one()],
            ]
        })
    }

    /// Quadratic energy from a chart-matrix closure, supplied twice: on
    /// floats (kept for independent oracle routes) and on jets (used in the
    /// energy function). Both must describe the same symmetric matrix.
    pub fn riemannian(
        n: usize,
        p: f64,
        label: &str,
        chart_values: ChartF64,
        chart_jets: impl Fn(&[Jet]) -> Vec<Vec<Jet>> + Send + Sync + 'static,
    ) -> Result<MetricModel> {
        check_p(p)?;
        let f2 = ScalarField::new(n, n, move |x, y| {
            let g = chart_jets(x);
            quadratic(&g, y)
        });
        Ok(MetricModel {
            n,
            p,
            kind: MetricKind::Riemannian,
            label: label.to_string(),
            f2,
            chart_f64: Some(chart_values),
        })
    }

    /// Randers-type energy `F = sqrt(a_ij y^i y^j) + b_i y^i`, constant
    /// coefficients. Requires `a` symmetric positive definite on the chart
    /// and `|b|_a < 1` so that `F > 0` off the null section.
    pub fn randers(a: Vec<Vec<f64>>, b: Vec<f64>, p: f64) -> Result<MetricModel> {
        check_p(p)?;
        let n = a.len();
        if b.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(
                "randers coefficients a (n x n) and b (n) must agree".into(),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                if (a[i][j] - a[j][i]).abs() > 1e-12 {
                    return Err(Error::Dimension("randers matrix a must be symmetric".into()));
                }
            }
        }
        let a_inv = linalg::invert_f64(&a);
        let mut b_norm_sq = 0.0;
        for i in 0..n {
            for j in 0..n {
                b_norm_sq += a_inv[i][j] * b[i] * b[j];
            }
        }
        if b_norm_sq >= 1.0 {
            return Err(Error::Dimension(format!(
                "randers drift too strong: |b|_a^2 = {b_norm_sq:.4} must be < 1"
            )));
        }
        let (ac, bc) = (a.clone(), b.clone());
        let f2 = ScalarField::new(n, n, move |_x, y| {
            let sp = y[0].space().clone();
            let mut ayy = Jet::constant(&sp, 0.0);
            for i in 0..ac.len() {
                for j in 0..ac.len() {
                    if ac[i][j] != 0.0 {
                        ayy = &ayy + &(&y[i] * &y[j]).scale(ac[i][j]);
                    }
                }
            }
            let mut by = Jet::constant(&sp, 0.0);
            for (i, &bi) in bc.iter().enumerate() {
                if bi != 0.0 {
                    by = &by + &y[i].scale(bi);
                }
            }
            let f = &ayy.sqrt() + &by;
            &f * &f
        });
        Ok(MetricModel {
            n,
            p,
            kind: MetricKind::Randers,
            label: "randers".to_string(),
            f2,
            chart_f64: None,
        })
    }

    /// Wraps a user-supplied energy function. The closure must be positively
    /// 2-homogeneous in `y` and produce an invertible fundamental tensor on
    /// the region of interest; both are enforced pointwise, not globally.
    pub fn custom(n: usize, p: f64, label: &str, f2: ScalarField) -> Result<MetricModel> {
        check_p(p)?;
        if f2.n_x() != n || f2.n_y() != n {
            return Err(Error::Dimension(format!(
                "energy function arity ({}, {}) does not match chart dimension {n}",
                f2.n_x(),
                f2.n_y()
            )));
        }
        Ok(MetricModel {
            n,
            p,
            kind: MetricKind::Custom,
            label: label.to_string(),
            f2,
            chart_f64: None,
        })
    }

    /// Chart dimension.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lift constant `p`.
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Model family.
    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    /// Human-readable label for reports.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// The energy function.
    pub fn energy(&self) -> &ScalarField {
        &self.f2
    }

    /// Whether the energy is quadratic in `y` (Euclidean or Riemannian), in
    /// which case classical reductions apply.
    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, MetricKind::Euclidean | MetricKind::Riemannian)
    }

    /// Chart matrix on floats, when the model is chart-quadratic. Reserved
    /// for independent oracle routes.
    pub fn chart_matrix(&self, x: &[f64]) -> Option<Vec<Vec<f64>>> {
        self.chart_f64.as_ref().map(|c| c(x))
    }

    /// Validates a point of the slit bundle chart.
    pub fn point(&self, x: Vec<f64>, y: Vec<f64>) -> Result<AmbientPoint> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::Dimension(format!(
                "point dimensions ({}, {}) do not match chart dimension {}",
                x.len(),
                y.len(),
                self.n
            )));
        }
        let pt = AmbientPoint { x, y };
        self.metric_at(&pt)?;
        Ok(pt)
    }

    /// Fundamental tensor and lifted metric at a point.
    pub fn metric_at(&self, pt: &AmbientPoint) -> Result<MetricAtPoint> {
        let sp = jet::space(self.n, 2);
        let xj: Vec<Jet> = pt.x.iter().map(|&v| Jet::constant(&sp, v)).collect();
        let yj: Vec<Jet> = pt
            .y
            .iter()
            .enumerate()
            .map(|(a, &v)| Jet::variable(&sp, a, v))
            .collect();
        let f2 = self.f2.eval(&xj, &yj);
        let mut g = vec![vec![0.0; self.n]; self.n];
        for a in 0..self.n {
            for b in 0..self.n {
                let mut mono = vec![0u8; self.n];
                mono[a] += 1;
                mono[b] += 1;
                g[a][b] = 0.5 * f2.partial(&mono);
            }
        }
        let mut norm_sq = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                norm_sq += g[a][b] * pt.y[a] * pt.y[b];
            }
        }
        if norm_sq.abs() < EPS_NULL {
            return Err(Error::NullSection { norm_sq });
        }
        let det_g = det_f64(&g);
        if det_g.abs() < EPS_DET {
            return Err(Error::DegenerateMetric {
                det: det_g,
                x: pt.x.clone(),
                y: pt.y.clone(),
            });
        }
        let g_inv = linalg::invert_f64(&g);
        let lift = self.p * self.p / norm_sq;
        let h = scale_mat(&g, lift);
        let h_inv = scale_mat(&g_inv, 1.0 / lift);
        Ok(MetricAtPoint {
            g,
            g_inv,
            h,
            h_inv,
            norm_sq,
            f2: f2.value(),
            det_g,
        })
    }
}

/// Fundamental tensor `g_ab = 1/2 pd^2 F^2 / pd y^a pd y^b` at a point.
pub fn fundamental_tensor(model: &MetricModel, pt: &AmbientPoint) -> Result<Vec<Vec<f64>>> {
    Ok(model.metric_at(pt)?.g)
}

/// Squared fiber norm `g_ab y^a y^b` at a point.
pub fn norm_sq(model: &MetricModel, pt: &AmbientPoint) -> Result<f64> {
    Ok(model.metric_at(pt)?.norm_sq)
}

/// Homogeneously lifted fiber metric `h_ab = (p^2 / |y|^2) g_ab`.
pub fn homogeneous_lift(model: &MetricModel, pt: &AmbientPoint) -> Result<Vec<Vec<f64>>> {
    Ok(model.metric_at(pt)?.h)
}

fn check_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Dimension(format!("lift constant p must be positive, got {p}")));
    }
    Ok(())
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn scale_mat(m: &[Vec<f64>], k: f64) -> Vec<Vec<f64>> {
    m.iter().map(|row| row.iter().map(|&v| v * k).collect()).collect()
}

pub(crate) fn det_f64(m: &[Vec<f64>]) -> f64 {
    // Gaussian elimination with partial pivoting; n <= 4.
    let n = m.len();
    let mut w: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| w[i][col].abs().total_cmp(&w[j][col].abs()))
            .expect("nonempty pivot range");
        if piv != col {
            w.swap(piv, col);
            det = -det;
        }
        let p = w[col][col];
        if p == 0.0 {
            return 0.0;
        }
        det *= p;
        for i in col + 1..n {
            let f = w[i][col] / p;
            for j in col..n {
                w[i][j] -= f * w[col][j];
            }
        }
    }
    det
}

/// Evaluates `y^T g y` on jets.
fn quadratic(g: &[Vec<Jet>], y: &[Jet]) -> Jet {
    let sp = y[0].space().clone();
    let mut acc = Jet::constant(&sp, 0.0);
    for (i, row) in g.iter().enumerate() {
        for (j, gij) in row.iter().enumerate() {
            acc = &acc + &(&(gij * &y[i]) * &y[j]);
        }
    }
    acc
}
