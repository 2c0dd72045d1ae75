//! Connection apparatus on the slit tangent bundle of a chart.
//!
//! The centerpiece is [`bundle_jets`]: given the energy function and jets for
//! the chart arguments, it produces the fundamental and lifted metrics, the
//! spray, the nonlinear connection, and the four metrical connection blocks,
//! all as jets. Callers choose the host jet space, which is what lets the
//! same code serve three masters:
//!
//! * plain chart points (probe variables seeded directly),
//! * lifted submanifold points (chart arguments carry parameter dependence
//!   plus probe displacements, so restriction and chain rule happen for
//!   free), and
//! * the intrinsic geometry of a submanifold (same machinery at the lower
//!   dimension).
//!
//! Torsion and curvature assembly is parameterized by a connection-block set
//! and a nonlinear-connection field, so induced and intrinsic connections
//! reuse it verbatim. Curvature comes out of two independent routes: direct
//! transcription of the coefficient formulas, and a Ricci-identity oracle
//! built from chained covariant derivatives of coordinate frame fields plus
//! torsion corrections. Their agreement is a correctness gate, not a given.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::jet::{self, Jet};
use crate::linalg::{self, FloatTensor, JMat, JetTensor};
use crate::metric::{AmbientPoint, MetricModel, EPS_DET, EPS_NULL};

/// Rank-3 jet block, indexed `[upper][lower][lower]`.
pub type JBlock = Vec<Vec<Vec<Jet>>>;
/// Rank-3 float block.
pub type Block3 = Vec<Vec<Vec<f64>>>;
/// Rank-4 float block, curvature layout `[b][a][c][d]`.
pub type Block4 = Vec<Vec<Vec<Vec<f64>>>>;

/// Positions of the chart directions inside a host jet space: formal
/// derivatives with respect to `x[a]` and `y[a]` are taken along these
/// variables.
#[derive(Clone, Debug)]
pub struct ChartVars {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

impl ChartVars {
    /// Standard layout for a pure chart evaluation: `x` then `y`.
    pub fn standard(n: usize) -> ChartVars {
        ChartVars {
            x: (0..n).collect(),
            y: (n..2 * n).collect(),
        }
    }
}

/// The four coefficient blocks of a metrical connection, as jets.
pub struct ConnJets {
    pub l00: JBlock,
    pub l10: JBlock,
    pub c01: JBlock,
    pub c11: JBlock,
}

impl ConnJets {
    /// Value parts of all four blocks.
    pub fn values(&self) -> ConnBlocksAtPoint {
        ConnBlocksAtPoint {
            l00: linalg::values3(&self.l00),
            l10: linalg::values3(&self.l10),
            c01: linalg::values3(&self.c01),
            c11: linalg::values3(&self.c11),
        }
    }
}

/// Everything [`bundle_jets`] computes, kept as jets so callers can take the
/// one further derivative the torsion/curvature formulas need.
pub struct BundleJets {
    pub n: usize,
    pub p: f64,
    pub cv: ChartVars,
    pub f2: Jet,
    pub norm_sq: Jet,
    pub g: JMat,
    pub g_inv: JMat,
    pub h: JMat,
    pub h_inv: JMat,
    pub det_g: f64,
    pub spray: Vec<Jet>,
    /// `N^a_b`, indexed `[a][b]`.
    pub n_conn: JMat,
    pub conn: ConnJets,
}

/// Nonlinear connection data at a point.
#[derive(Clone, Debug)]
pub struct NonlinearConnAtPoint {
    /// `N^a_b`.
    pub n: Vec<Vec<f64>>,
    /// Fiber derivatives `pd N^a_b / pd y^c`, indexed `[a][b][c]`.
    pub dn_dy: Block3,
    /// Base derivatives `pd N^a_b / pd x^c`, indexed `[a][b][c]`.
    pub dn_dx: Block3,
}

/// The four metrical connection blocks at a point, indexed `[a][b][c]`.
#[derive(Clone, Debug)]
pub struct ConnBlocksAtPoint {
    pub l00: Block3,
    pub l10: Block3,
    pub c01: Block3,
    pub c11: Block3,
}

/// Torsion blocks at a point, indexed `[a][b][c]`.
#[derive(Clone, Debug)]
pub struct TorsionAtPoint {
    /// Horizontal (hh) torsion `L00 - L00` transposed; zero here.
    pub t00: Block3,
    /// Vertical (hh) torsion: the bracket coefficient, oriented so the
    /// curvature formulas are operator commutators.
    pub r01: Block3,
    /// Mixed (hv) torsion living in the horizontal family: equals C01.
    pub p10: Block3,
    /// Mixed (hv) torsion in the vertical family: `B - L10` transposed.
    pub p11: Block3,
    /// Vertical (vv) torsion `C11 - C11` transposed; zero here.
    pub s11: Block3,
}

/// Curvature blocks at a point, indexed `[b][a][c][d]` per the coefficient
/// display order (lower index first, then upper, then the derivative pair).
#[derive(Clone, Debug)]
pub struct CurvatureAtPoint {
    pub rh: Block4,
    pub ph: Block4,
    pub sh: Block4,
    pub rv: Block4,
    pub pv: Block4,
    pub sv: Block4,
}

impl CurvatureAtPoint {
    /// Blocks paired with stable names, display order.
    pub fn blocks(&self) -> [(&'static str, &Block4); 6] {
        [
            ("rh", &self.rh),
            ("ph", &self.ph),
            ("sh", &self.sh),
            ("rv", &self.rv),
            ("pv", &self.pv),
            ("sv", &self.sv),
        ]
    }
}

/// Which family an index of a d-tensor belongs to; decides which connection
/// block corrects it under covariant differentiation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexFamily {
    Horizontal,
    Vertical,
}

/// Variance and family of one tensor index.
#[derive(Clone, Copy, Debug)]
pub struct IndexType {
    pub upper: bool,
    pub family: IndexFamily,
}

impl IndexType {
    pub const fn up_h() -> IndexType {
        IndexType { upper: true, family: IndexFamily::Horizontal }
    }
    pub const fn up_v() -> IndexType {
        IndexType { upper: true, family: IndexFamily::Vertical }
    }
    pub const fn low_h() -> IndexType {
        IndexType { upper: false, family: IndexFamily::Horizontal }
    }
    pub const fn low_v() -> IndexType {
        IndexType { upper: false, family: IndexFamily::Vertical }
    }
}

/// Direction of a covariant derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivDirection {
    /// Along the horizontal frame (delta derivative).
    Horizontal,
    /// Along the vertical frame (fiber derivative).
    Vertical,
}

/// A tensor field on the slit bundle with declared index typing, evaluable on
/// jets. Used by the public covariant-derivative operations.
pub struct TensorField {
    pub typing: Vec<IndexType>,
    pub eval: Arc<dyn Fn(&[Jet], &[Jet]) -> JetTensor + Send + Sync>,
}

/// Evaluates the full connection apparatus from an energy function and chart
/// argument jets. `x` and `y` must live in one space; `cv` names the space
/// variables that realize the chart directions.
///
/// Jet budget: with the host space truncated at total order 4, the returned
/// metric jets are valid to order 2 and every connection block to order 1,
/// exactly enough for one further derivative in torsion/curvature formulas.
pub fn bundle_jets(
    energy: &ScalarField,
    p: f64,
    x: &[Jet],
    y: &[Jet],
    cv: ChartVars,
) -> Result<BundleJets> {
    let n = x.len();
    assert_eq!(y.len(), n, "chart argument arity mismatch");
    assert_eq!(cv.x.len(), n, "chart variable map arity mismatch");
    assert_eq!(cv.y.len(), n, "chart variable map arity mismatch");
    let f2 = energy.eval(x, y);
    let sp = f2.space().clone();

    // Fundamental tensor: half the fiber Hessian of the energy.
    let g = linalg::jmat(n, n, |a, b| {
        f2.deriv(cv.y[a]).deriv(cv.y[b]).scale(0.5)
    });
    let (g_inv, det_g) = linalg::invert(&g);
    if det_g.abs() < EPS_DET {
        return Err(Error::DegenerateMetric {
            det: det_g,
            x: x.iter().map(Jet::value).collect(),
            y: y.iter().map(Jet::value).collect(),
        });
    }

    // Squared fiber norm g_ab y^a y^b; equals the energy by homogeneity,
    // which stays an asserted check elsewhere rather than an assumption here.
    let mut norm_sq = Jet::constant(&sp, 0.0);
    for a in 0..n {
        for b in 0..n {
            norm_sq = &norm_sq + &(&(&g[a][b] * &y[a]) * &y[b]);
        }
    }
    if norm_sq.value().abs() < EPS_NULL {
        return Err(Error::NullSection { norm_sq: norm_sq.value() });
    }

    // Homogeneous lift: h = (p^2 / |y|^2) g, inverted in closed form.
    let lift = norm_sq.recip().scale(p * p);
    let lift_inv = norm_sq.scale(1.0 / (p * p));
    let h = linalg::jmat(n, n, |a, b| &g[a][b] * &lift);
    let h_inv = linalg::jmat(n, n, |a, b| &g_inv[a][b] * &lift_inv);

    // Canonical spray in energy form:
    // G^a = 1/4 g^{ad} (y^b pd^2 F^2/pd x^b pd y^d - pd F^2/pd x^d).
    // Algebraically equal to the Christoffel contraction for 2-homogeneous
    // energies (asserted as a check row), and one derivative cheaper.
    let spray = linalg::jvec(n, |a| {
        let mut acc = Jet::constant(&sp, 0.0);
        for d in 0..n {
            let mut t = f2.deriv(cv.x[d]).scale(-1.0);
            for b in 0..n {
                t = &t + &(&y[b] * &f2.deriv(cv.x[b]).deriv(cv.y[d]));
            }
            acc = &acc + &(&g_inv[a][d] * &t);
        }
        acc.scale(0.25)
    });

    // Cartan nonlinear connection: N^a_b = pd G^a / pd y^b.
    let n_conn = linalg::jmat(n, n, |a, b| spray[a].deriv(cv.y[b]));

    // Christoffel-form blocks for both metric families. The horizontal pair
    // uses delta derivatives, the vertical pair plain fiber derivatives.
    let delta = |j: &Jet, a: usize| delta_deriv(j, a, &cv, &n_conn);
    let ddot = |j: &Jet, a: usize| j.deriv(cv.y[a]);
    let christoffel_form = |metric: &JMat, metric_inv: &JMat, d1: &dyn Fn(&Jet, usize) -> Jet| {
        linalg::jcube(n, n, n, |a, b, c| {
            let mut acc = Jet::constant(&sp, 0.0);
            for d in 0..n {
                let sum = &(&d1(&metric[d][c], b) + &d1(&metric[b][d], c)) - &d1(&metric[b][c], d);
                acc = &acc + &(&metric_inv[a][d] * &sum);
            }
            acc.scale(0.5)
        })
    };
    let l00 = christoffel_form(&g, &g_inv, &delta);
    let l10 = christoffel_form(&h, &h_inv, &delta);
    let c01 = christoffel_form(&g, &g_inv, &ddot);
    let c11 = christoffel_form(&h, &h_inv, &ddot);

    Ok(BundleJets {
        n,
        p,
        cv,
        f2,
        norm_sq,
        g,
        g_inv,
        h,
        h_inv,
        det_g,
        spray,
        n_conn,
        conn: ConnJets { l00, l10, c01, c11 },
    })
}

/// Horizontal (delta) derivative of a jet along chart direction `a`:
/// the plain base derivative minus the nonlinear-connection tilt.
pub fn delta_deriv(j: &Jet, a: usize, cv: &ChartVars, n_conn: &JMat) -> Jet {
    let mut acc = j.deriv(cv.x[a]);
    for b in 0..cv.y.len() {
        acc = &acc - &(&n_conn[b][a] * &j.deriv(cv.y[b]));
    }
    acc
}

impl BundleJets {
    /// Horizontal derivative of a jet along direction `a`.
    pub fn delta(&self, j: &Jet, a: usize) -> Jet {
        delta_deriv(j, a, &self.cv, &self.n_conn)
    }

    /// Fiber derivative of a jet along direction `a`.
    pub fn ddot(&self, j: &Jet, a: usize) -> Jet {
        j.deriv(self.cv.y[a])
    }

    /// Evaluates at a plain chart point in the standard host space (chart
    /// variables seeded as probe displacements, truncation order 4).
    pub fn at_point(model: &MetricModel, pt: &AmbientPoint) -> Result<BundleJets> {
        let n = model.dim();
        let sp = jet::space(2 * n, 4);
        let x: Vec<Jet> = (0..n).map(|a| Jet::variable(&sp, a, pt.x[a])).collect();
        let y: Vec<Jet> = (0..n).map(|a| Jet::variable(&sp, n + a, pt.y[a])).collect();
        bundle_jets(model.energy(), model.p(), &x, &y, ChartVars::standard(n))
    }
}

/// Christoffel symbols of the fundamental tensor with plain base derivatives
/// (no nonlinear-connection tilt).
pub fn christoffel(model: &MetricModel, pt: &AmbientPoint) -> Result<Block3> {
    let bj = BundleJets::at_point(model, pt)?;
    let n = bj.n;
    let mut out = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for d in 0..n {
                    let sum = bj.g[d][c].deriv(bj.cv.x[b]).value()
                        + bj.g[b][d].deriv(bj.cv.x[c]).value()
                        - bj.g[b][c].deriv(bj.cv.x[d]).value();
                    acc += bj.g_inv[a][d].value() * sum;
                }
                out[a][b][c] = 0.5 * acc;
            }
        }
    }
    Ok(out)
}

/// Canonical spray coefficients `G^a` at a point.
pub fn spray(model: &MetricModel, pt: &AmbientPoint) -> Result<Vec<f64>> {
    let bj = BundleJets::at_point(model, pt)?;
    Ok(bj.spray.iter().map(Jet::value).collect())
}

/// Cartan nonlinear connection with its first derivatives.
pub fn cartan_nonlinear_connection(
    model: &MetricModel,
    pt: &AmbientPoint,
) -> Result<NonlinearConnAtPoint> {
    let bj = BundleJets::at_point(model, pt)?;
    let n = bj.n;
    let n_vals = linalg::values2(&bj.n_conn);
    let mut dn_dy = vec![vec![vec![0.0; n]; n]; n];
    let mut dn_dx = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                dn_dy[a][b][c] = bj.n_conn[a][b].deriv(bj.cv.y[c]).value();
                dn_dx[a][b][c] = bj.n_conn[a][b].deriv(bj.cv.x[c]).value();
            }
        }
    }
    Ok(NonlinearConnAtPoint { n: n_vals, dn_dy, dn_dx })
}

/// Horizontal (delta) derivative of a scalar field at a point, all chart
/// directions at once.
pub fn delta_derivative(
    model: &MetricModel,
    pt: &AmbientPoint,
    f: &ScalarField,
) -> Result<Vec<f64>> {
    assert_eq!(f.n_x(), model.dim(), "field base arity mismatch");
    assert_eq!(f.n_y(), model.dim(), "field fiber arity mismatch");
    let bj = BundleJets::at_point(model, pt)?;
    let n = bj.n;
    let sp = bj.f2.space().clone();
    let x: Vec<Jet> = (0..n).map(|a| Jet::variable(&sp, a, pt.x[a])).collect();
    let y: Vec<Jet> = (0..n).map(|a| Jet::variable(&sp, n + a, pt.y[a])).collect();
    let fj = f.eval(&x, &y);
    Ok((0..n).map(|a| bj.delta(&fj, a).value()).collect())
}

/// The four Cartan metrical connection blocks at a point.
pub fn cartan_metrical_connection(
    model: &MetricModel,
    pt: &AmbientPoint,
) -> Result<ConnBlocksAtPoint> {
    let bj = BundleJets::at_point(model, pt)?;
    Ok(ConnBlocksAtPoint {
        l00: linalg::values3(&bj.conn.l00),
        l10: linalg::values3(&bj.conn.l10),
        c01: linalg::values3(&bj.conn.c01),
        c11: linalg::values3(&bj.conn.c11),
    })
}

/// Bracket coefficients of the adapted frame: `R^a_{bc} = delta_b N^a_c -
/// delta_c N^a_b` (so that `[delta_b, delta_c] = -R^a_{bc} pd_a` on the
/// fiber) and `B^a_{bc} = pd_c N^a_b`.
pub fn bracket_coefficients(model: &MetricModel, pt: &AmbientPoint) -> Result<(Block3, Block3)> {
    let bj = BundleJets::at_point(model, pt)?;
    Ok(bracket_from_jets(&bj.n_conn, &bj.cv))
}

/// Bracket coefficients from a nonlinear-connection jet field.
pub fn bracket_from_jets(n_conn: &JMat, cv: &ChartVars) -> (Block3, Block3) {
    let n = n_conn.len();
    let mut r = vec![vec![vec![0.0; n]; n]; n];
    let mut b = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for i in 0..n {
            for j in 0..n {
                r[a][i][j] = delta_deriv(&n_conn[a][j], i, cv, n_conn).value()
                    - delta_deriv(&n_conn[a][i], j, cv, n_conn).value();
                b[a][i][j] = n_conn[a][i].deriv(cv.y[j]).value();
            }
        }
    }
    (r, b)
}

/// Torsion blocks assembled from connection jets. Generic over the
/// connection so induced and intrinsic connections share it.
pub fn assemble_torsion(conn: &ConnJets, n_conn: &JMat, cv: &ChartVars) -> TorsionAtPoint {
    let n = n_conn.len();
    let (r_spec, b_brk) = bracket_from_jets(n_conn, cv);
    let l00 = linalg::values3(&conn.l00);
    let l10 = linalg::values3(&conn.l10);
    let c01 = linalg::values3(&conn.c01);
    let c11 = linalg::values3(&conn.c11);
    let mut t00 = vec![vec![vec![0.0; n]; n]; n];
    let mut r01 = vec![vec![vec![0.0; n]; n]; n];
    let mut p11 = vec![vec![vec![0.0; n]; n]; n];
    let mut s11 = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                t00[a][b][c] = l00[a][b][c] - l00[a][c][b];
                // Orientation opposite to the raw bracket coefficient: the
                // choice that turns the curvature displays into genuine
                // operator commutators (asserted by the oracle rows).
                r01[a][b][c] = -r_spec[a][b][c];
                p11[a][b][c] = b_brk[a][b][c] - l10[a][c][b];
                s11[a][b][c] = c11[a][b][c] - c11[a][c][b];
            }
        }
    }
    TorsionAtPoint { t00, r01, p10: c01, p11, s11 }
}

/// Torsion blocks of the Cartan connection at a point.
pub fn torsion_tensors(model: &MetricModel, pt: &AmbientPoint) -> Result<TorsionAtPoint> {
    let bj = BundleJets::at_point(model, pt)?;
    Ok(assemble_torsion(&bj.conn, &bj.n_conn, &bj.cv))
}

fn zeros4(n: usize) -> Block4 {
    vec![vec![vec![vec![0.0; n]; n]; n]; n]
}

/// Curvature blocks by direct transcription of the coefficient formulas.
pub fn assemble_curvature(conn: &ConnJets, n_conn: &JMat, cv: &ChartVars) -> CurvatureAtPoint {
    let n = n_conn.len();
    let tor = assemble_torsion(conn, n_conn, cv);
    let l00 = linalg::values3(&conn.l00);
    let l10 = linalg::values3(&conn.l10);
    let c01 = linalg::values3(&conn.c01);
    let c11 = linalg::values3(&conn.c11);
    let delta = |j: &Jet, a: usize| delta_deriv(j, a, cv, n_conn).value();
    let ddot = |j: &Jet, a: usize| j.deriv(cv.y[a]).value();

    // R-type blocks: delta-delta with the bracket-torsion correction.
    let r_type = |lj: &JBlock, l: &Block3, cc: &Block3| -> Block4 {
        let mut out = zeros4(n);
        for b in 0..n {
            for a in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = delta(&lj[a][b][c], d) - delta(&lj[a][b][d], c);
                        for f in 0..n {
                            v += l[f][b][c] * l[a][f][d] - l[f][b][d] * l[a][f][c]
                                + cc[a][b][f] * tor.r01[f][c][d];
                        }
                        out[b][a][c][d] = v;
                    }
                }
            }
        }
        out
    };
    // S-type blocks: fiber-fiber, pure C.
    let s_type = |cj: &JBlock, cc: &Block3| -> Block4 {
        let mut out = zeros4(n);
        for b in 0..n {
            for a in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = ddot(&cj[a][b][c], d) - ddot(&cj[a][b][d], c);
                        for f in 0..n {
                            v += cc[f][b][c] * cc[a][f][d] - cc[f][b][d] * cc[a][f][c];
                        }
                        out[b][a][c][d] = v;
                    }
                }
            }
        }
        out
    };
    // P-type blocks: mixed, with the horizontal covariant derivative of the
    // C-block (family typing: the block's own family pairs its upper and
    // first lower index; the last index rides the other family's L).
    let p_type = |lj: &JBlock, cj: &JBlock, l: &Block3, lof: &Block3, cc: &Block3| -> Block4 {
        // lj, l: the family's L-block jets/values; cj, cc: its C-block;
        // lof: the L-block correcting the C-block's vertical last index.
        let mut out = zeros4(n);
        for b in 0..n {
            for a in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        // C^a_{bd} covariantly differentiated along delta_c.
                        let mut cd = delta(&cj[a][b][d], c);
                        for f in 0..n {
                            cd += l[a][f][c] * cc[f][b][d]
                                - l[f][b][c] * cc[a][f][d]
                                - lof[f][d][c] * cc[a][b][f];
                        }
                        let mut v = ddot(&lj[a][b][c], d) - cd;
                        for f in 0..n {
                            v += cc[a][b][f] * tor.p11[f][c][d];
                        }
                        out[b][a][c][d] = v;
                    }
                }
            }
        }
        out
    };

    CurvatureAtPoint {
        rh: r_type(&conn.l00, &l00, &c01),
        ph: p_type(&conn.l00, &conn.c01, &l00, &l10, &c01),
        sh: s_type(&conn.c01, &c01),
        rv: r_type(&conn.l10, &l10, &c11),
        pv: p_type(&conn.l10, &conn.c11, &l10, &l10, &c11),
        sv: s_type(&conn.c11, &c11),
    }
}

/// Curvature blocks of the Cartan connection at a point, formula route.
pub fn curvature_tensors(model: &MetricModel, pt: &AmbientPoint) -> Result<CurvatureAtPoint> {
    let bj = BundleJets::at_point(model, pt)?;
    Ok(assemble_curvature(&bj.conn, &bj.n_conn, &bj.cv))
}

/// Generic covariant derivative of a jet tensor with declared index typing.
/// Returns values, with the derivative direction appended as the last index.
///
/// Horizontal direction: delta derivative plus L-block corrections (L00 for
/// horizontal indices, L10 for vertical). Vertical direction: fiber
/// derivative plus C-block corrections (C01 / C11 respectively).
pub fn covariant_derivative_jets(
    conn: &ConnJets,
    n_conn: &JMat,
    cv: &ChartVars,
    tensor: &JetTensor,
    typing: &[IndexType],
    dir: DerivDirection,
) -> FloatTensor {
    assert_eq!(tensor.dims.len(), typing.len(), "typing arity mismatch");
    let n = n_conn.len();
    assert!(tensor.dims.iter().all(|&d| d == n), "tensor dims must match the chart");
    let block = |fam: IndexFamily| -> &JBlock {
        match (dir, fam) {
            (DerivDirection::Horizontal, IndexFamily::Horizontal) => &conn.l00,
            (DerivDirection::Horizontal, IndexFamily::Vertical) => &conn.l10,
            (DerivDirection::Vertical, IndexFamily::Horizontal) => &conn.c01,
            (DerivDirection::Vertical, IndexFamily::Vertical) => &conn.c11,
        }
    };
    let mut dims = tensor.dims.clone();
    dims.push(n);
    let mut out = FloatTensor::zeros(dims);
    let rank = typing.len();
    let mut idx = vec![0usize; rank];
    let total: usize = tensor.dims.iter().product::<usize>().max(1);
    for flat in 0..total {
        // Decode row-major multi-index.
        let mut rem = flat;
        for axis in (0..rank).rev() {
            idx[axis] = rem % n;
            rem /= n;
        }
        for c in 0..n {
            let entry = tensor.get(&idx);
            let mut v = match dir {
                DerivDirection::Horizontal => delta_deriv(entry, c, cv, n_conn).value(),
                DerivDirection::Vertical => entry.deriv(cv.y[c]).value(),
            };
            for (axis, ty) in typing.iter().enumerate() {
                let blk = block(ty.family);
                let own = idx[axis];
                let mut swapped = idx.clone();
                for f in 0..n {
                    swapped[axis] = f;
                    let neighbor = tensor.get(&swapped).value();
                    if ty.upper {
                        v += blk[own][f][c].value() * neighbor;
                    } else {
                        v -= blk[f][own][c].value() * neighbor;
                    }
                }
            }
            let mut oidx = idx.clone();
            oidx.push(c);
            out.set(&oidx, v);
        }
    }
    out
}

/// Public covariant derivative of a typed tensor field at a point.
pub fn covariant_derivative(
    model: &MetricModel,
    pt: &AmbientPoint,
    field: &TensorField,
    dir: DerivDirection,
) -> Result<FloatTensor> {
    let bj = BundleJets::at_point(model, pt)?;
    let n = bj.n;
    let sp = bj.f2.space().clone();
    let x: Vec<Jet> = (0..n).map(|a| Jet::variable(&sp, a, pt.x[a])).collect();
    let y: Vec<Jet> = (0..n).map(|a| Jet::variable(&sp, n + a, pt.y[a])).collect();
    let tensor = (field.eval)(&x, &y);
    Ok(covariant_derivative_jets(
        &bj.conn, &bj.n_conn, &bj.cv, &tensor, &field.typing, dir,
    ))
}

/// Metricity residuals of the four (metric, block) pairings, as max-abs over
/// all components: (g horizontal, g vertical, h horizontal, h vertical).
pub fn metricity_residuals(bj: &BundleJets) -> [f64; 4] {
    let n = bj.n;
    let run = |metric: &JMat, fam: IndexFamily, dir: DerivDirection| -> f64 {
        let tensor = JetTensor::from_fn(vec![n, n], |idx| metric[idx[0]][idx[1]].clone());
        let typing = [
            IndexType { upper: false, family: fam },
            IndexType { upper: false, family: fam },
        ];
        covariant_derivative_jets(&bj.conn, &bj.n_conn, &bj.cv, &tensor, &typing, dir).max_abs()
    };
    [
        run(&bj.g, IndexFamily::Horizontal, DerivDirection::Horizontal),
        run(&bj.g, IndexFamily::Horizontal, DerivDirection::Vertical),
        run(&bj.h, IndexFamily::Vertical, DerivDirection::Horizontal),
        run(&bj.h, IndexFamily::Vertical, DerivDirection::Vertical),
    ]
}

/// Curvature blocks via the Ricci-identity oracle: chained covariant
/// derivatives of the coordinate frame fields plus torsion corrections.
///
/// For a coordinate frame field the first covariant derivative is a bare
/// connection-block slice, so the chained route only ever takes one jet
/// derivative; independence from the formula route lies in the generic
/// correction machinery and the torsion contractions.
pub fn assemble_curvature_oracle(
    conn: &ConnJets,
    n_conn: &JMat,
    cv: &ChartVars,
) -> CurvatureAtPoint {
    let n = n_conn.len();
    let tor = assemble_torsion(conn, n_conn, cv);
    let l00 = linalg::values3(&conn.l00);
    let l10 = linalg::values3(&conn.l10);
    let c01 = linalg::values3(&conn.c01);
    let c11 = linalg::values3(&conn.c11);
    let slice = |blk: &JBlock, b: usize| {
        JetTensor::from_fn(vec![n, n], |idx| blk[idx[0]][b][idx[1]].clone())
    };
    let h = DerivDirection::Horizontal;
    let v = DerivDirection::Vertical;

    // Same-direction commutator: D(T)[a][c][d] - D(T)[a][d][c] plus torsion
    // corrections against the first-derivative slices.
    let comm_same =
        |t1j: &dyn Fn(usize) -> JetTensor, ty: [IndexType; 2], dir, x0: &Block3, x1: &Block3| -> Block4 {
            let mut out = zeros4(n);
            for b in 0..n {
                let u = covariant_derivative_jets(conn, n_conn, cv, &t1j(b), &ty, dir);
                for a in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            let mut val = u.get(&[a, c, d]) - u.get(&[a, d, c]);
                            for f in 0..n {
                                let (tcorr0, tcorr1) = match dir {
                                    DerivDirection::Horizontal => {
                                        (tor.t00[f][c][d], tor.r01[f][c][d])
                                    }
                                    DerivDirection::Vertical => (0.0, tor.s11[f][c][d]),
                                };
                                val += tcorr0 * x0[a][b][f] + tcorr1 * x1[a][b][f];
                            }
                            out[b][a][c][d] = val;
                        }
                    }
                }
            }
            out
        };
    // Mixed commutator: vertical-of-horizontal minus horizontal-of-vertical
    // plus the mixed torsion corrections.
    let comm_mixed = |lslice: &dyn Fn(usize) -> JetTensor,
                      cslice: &dyn Fn(usize) -> JetTensor,
                      ty_l: [IndexType; 2],
                      ty_c: [IndexType; 2],
                      x0: &Block3,
                      x1: &Block3|
     -> Block4 {
        let mut out = zeros4(n);
        for b in 0..n {
            let vd = covariant_derivative_jets(conn, n_conn, cv, &lslice(b), &ty_l, v);
            let hc = covariant_derivative_jets(conn, n_conn, cv, &cslice(b), &ty_c, h);
            for a in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut val = vd.get(&[a, c, d]) - hc.get(&[a, d, c]);
                        for f in 0..n {
                            val += tor.p10[f][c][d] * x0[a][b][f]
                                + tor.p11[f][c][d] * x1[a][b][f];
                        }
                        out[b][a][c][d] = val;
                    }
                }
            }
        }
        out
    };

    let rh = comm_same(
        &|b| slice(&conn.l00, b),
        [IndexType::up_h(), IndexType::low_h()],
        h,
        &l00,
        &c01,
    );
    let rv = comm_same(
        &|b| slice(&conn.l10, b),
        [IndexType::up_v(), IndexType::low_h()],
        h,
        &l10,
        &c11,
    );
    let sh = comm_same(
        &|b| slice(&conn.c01, b),
        [IndexType::up_h(), IndexType::low_v()],
        v,
        &l00,
        &c01,
    );
    let sv = comm_same(
        &|b| slice(&conn.c11, b),
        [IndexType::up_v(), IndexType::low_v()],
        v,
        &l10,
        &c11,
    );
    let ph = comm_mixed(
        &|b| slice(&conn.l00, b),
        &|b| slice(&conn.c01, b),
        [IndexType::up_h(), IndexType::low_h()],
        [IndexType::up_h(), IndexType::low_v()],
        &l00,
        &c01,
    );
    let pv = comm_mixed(
        &|b| slice(&conn.l10, b),
        &|b| slice(&conn.c11, b),
        [IndexType::up_v(), IndexType::low_h()],
        [IndexType::up_v(), IndexType::low_v()],
        &l10,
        &c11,
    );
    CurvatureAtPoint { rh, ph, sh, rv, pv, sv }
}

/// Curvature blocks via the Ricci-identity oracle at a point.
pub fn commutator_curvature_oracle(
    model: &MetricModel,
    pt: &AmbientPoint,
) -> Result<CurvatureAtPoint> {
    let bj = BundleJets::at_point(model, pt)?;
    Ok(assemble_curvature_oracle(&bj.conn, &bj.n_conn, &bj.cv))
}

/// Richardson-extrapolated central difference of a matrix-valued map.
fn fd_matrix_deriv(
    f: &dyn Fn(&[f64]) -> Vec<Vec<f64>>,
    x: &[f64],
    dir: usize,
) -> Vec<Vec<f64>> {
    let hstep = f64::EPSILON.powf(0.2) * (1.0 + x[dir].abs());
    let at = |s: f64| {
        let mut xs = x.to_vec();
        xs[dir] += s;
        f(&xs)
    };
    let (p1, m1) = (at(hstep), at(-hstep));
    let (p2, m2) = (at(hstep / 2.0), at(-hstep / 2.0));
    let nr = p1.len();
    let nc = p1[0].len();
    (0..nr)
        .map(|i| {
            (0..nc)
                .map(|j| {
                    let d1 = (p1[i][j] - m1[i][j]) / (2.0 * hstep);
                    let d2 = (p2[i][j] - m2[i][j]) / hstep;
                    (4.0 * d2 - d1) / 3.0
                })
                .collect()
        })
        .collect()
}

/// Levi-Civita Christoffel symbols of a chart-quadratic model by finite
/// differences on the raw chart-matrix closure. Fully independent of the jet
/// pipeline; this is the reduction oracle for quadratic energies.
pub fn fd_levi_civita(model: &MetricModel, x: &[f64]) -> Result<Block3> {
    let chart = move |xs: &[f64]| {
        model
            .chart_matrix(xs)
            .expect("fd_levi_civita requires a chart-quadratic model")
    };
    if model.chart_matrix(x).is_none() {
        return Err(Error::Dimension(
            "Levi-Civita oracle needs a chart-quadratic metric model".into(),
        ));
    }
    let n = model.dim();
    let g = chart(x);
    let g_inv = linalg::invert_f64(&g);
    let dg: Vec<Vec<Vec<f64>>> = (0..n).map(|c| fd_matrix_deriv(&chart, x, c)).collect();
    let mut out = vec![vec![vec![0.0; n]; n]; n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for d in 0..n {
                    acc += g_inv[a][d] * (dg[b][d][c] + dg[c][b][d] - dg[d][b][c]);
                }
                out[a][b][c] = 0.5 * acc;
            }
        }
    }
    Ok(out)
}

/// Riemann curvature `R^a_{bcd} = pd_c G^a_{db} - pd_d G^a_{cb} + G G - G G`
/// of a chart-quadratic model, from finite differences of the Levi-Civita
/// oracle. Accuracy is second-order-difference grade; use loose tolerances.
pub fn fd_riemann(model: &MetricModel, x: &[f64]) -> Result<Block4> {
    let n = model.dim();
    let gamma_at = |xs: &[f64]| fd_levi_civita(model, xs).expect("chart-quadratic model");
    let gamma = gamma_at(x);
    let step = f64::EPSILON.powf(0.25) * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let dgamma: Vec<Block3> = (0..n)
        .map(|c| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[c] += step;
            xm[c] -= step;
            let gp = gamma_at(&xp);
            let gm = gamma_at(&xm);
            let mut d = vec![vec![vec![0.0; n]; n]; n];
            for a in 0..n {
                for b in 0..n {
                    for e in 0..n {
                        d[a][b][e] = (gp[a][b][e] - gm[a][b][e]) / (2.0 * step);
                    }
                }
            }
            d
        })
        .collect();
    let mut out = zeros4(n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dgamma[c][a][d][b] - dgamma[d][a][c][b];
                    for f in 0..n {
                        v += gamma[a][c][f] * gamma[f][d][b] - gamma[a][d][f] * gamma[f][c][b];
                    }
                    // Std layout: out[a][b][c][d] = R^a_{bcd}.
                    out[a][b][c][d] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Plane sectional curvature spanned by the first two chart directions,
/// contracted from the horizontal curvature block and the fundamental
/// tensor.
pub fn sectional_plane01(g: &[Vec<f64>], rh: &Block4) -> f64 {
    let mut num = 0.0;
    for e in 0..g.len() {
        num += g[0][e] * rh[1][e][1][0];
    }
    num / (g[0][0] * g[1][1] - g[0][1] * g[0][1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MaxAbs;
    use crate::metric::MetricModel;

    fn max3(b: &Block3) -> f64 {
        b.max_abs()
    }

    fn max4(b: &Block4) -> f64 {
        b.max_abs()
    }

    fn diff4(a: &Block4, b: &Block4) -> f64 {
        let mut m = 0.0f64;
        for (pa, pb) in a.iter().zip(b) {
            for (qa, qb) in pa.iter().zip(pb) {
                for (ra, rb) in qa.iter().zip(qb) {
                    for (sa, sb) in ra.iter().zip(rb) {
                        m = m.max((sa - sb).abs());
                    }
                }
            }
        }
        m
    }

    fn randers_model() -> MetricModel {
        let a = vec![
            vec![1.0, 0.05, 0.0],
            vec![0.05, 1.2, 0.0],
            vec![0.0, 0.0, 0.9],
        ];
        let b = vec![0.3, 0.0, -0.1];
        MetricModel::randers(a, b, 1.0).unwrap()
    }

    #[test]
    fn euclidean_connection_objects_vanish() {
        let m = MetricModel::euclidean(3, 1.0).unwrap();
        let pt = m.point(vec![0.2, -0.4, 1.1], vec![0.8, -1.2, 0.5]).unwrap();
        let nl = cartan_nonlinear_connection(&m, &pt).unwrap();
        assert!(nl.n.max_abs() < 1e-13, "flat nonlinear connection");
        let blocks = cartan_metrical_connection(&m, &pt).unwrap();
        assert!(max3(&blocks.l00) < 1e-13);
        assert!(max3(&blocks.c01) < 1e-13);
        let curv = curvature_tensors(&m, &pt).unwrap();
        assert!(max4(&curv.rh) < 1e-12);
        assert!(max4(&curv.ph) < 1e-12);
        assert!(max4(&curv.sh) < 1e-12);
        let (r, bb) = bracket_coefficients(&m, &pt).unwrap();
        assert!(max3(&r) < 1e-13);
        assert!(max3(&bb) < 1e-12);
    }

    #[test]
    fn euclidean_c11_matches_closed_form() {
        // Hand expansion of the vertical Christoffel form with h = g/|y|^2:
        // C11^a_{bc} = -(delta^a_b y_c + delta^a_c y_b - delta_{bc} y^a)/|y|^2.
        let m = MetricModel::euclidean(3, 1.4).unwrap();
        let y = vec![0.8, -1.2, 0.5];
        let pt = m.point(vec![0.0; 3], y.clone()).unwrap();
        let blocks = cartan_metrical_connection(&m, &pt).unwrap();
        let nsq: f64 = y.iter().map(|v| v * v).sum();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let kd = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                    let want = -(kd(a, b) * y[c] + kd(a, c) * y[b] - kd(b, c) * y[a]) / nsq;
                    assert!(
                        (blocks.c11[a][b][c] - want).abs() < 1e-12,
                        "C11[{a}][{b}][{c}] = {} want {want}",
                        blocks.c11[a][b][c]
                    );
                }
            }
        }
        // P11 = B - L10 transposed; for the flat chart B = 0.
        let tor = torsion_tensors(&m, &pt).unwrap();
        let nl = cartan_nonlinear_connection(&m, &pt).unwrap();
        assert!(max3(&nl.dn_dy) < 1e-12);
        let l10 = cartan_metrical_connection(&m, &pt).unwrap().l10;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    assert!((tor.p11[a][b][c] + l10[a][c][b]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sphere_chart_christoffels_match_classical_values() {
        let m = MetricModel::sphere_chart(1.0).unwrap();
        let x = vec![std::f64::consts::FRAC_PI_4, 0.3];
        let pt = m.point(x.clone(), vec![0.4, 1.0]).unwrap();
        let gamma = christoffel(&m, &pt).unwrap();
        let (s, c) = x[0].sin_cos();
        assert!((gamma[0][1][1] - (-s * c)).abs() < 1e-12, "polar-polar");
        assert!((gamma[1][0][1] - c / s).abs() < 1e-12, "mixed");
        assert!((gamma[1][1][0] - c / s).abs() < 1e-12, "mixed symmetric");
        assert!(gamma[0][0][0].abs() < 1e-12);
        // Independent finite-difference route agrees.
        let fd = fd_levi_civita(&m, &x).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for cc in 0..2 {
                    assert!(
                        (gamma[a][b][cc] - fd[a][b][cc]).abs() < 1e-10,
                        "fd mismatch at [{a}][{b}][{cc}]"
                    );
                }
            }
        }
    }

    #[test]
    fn sphere_chart_spray_value_is_frozen() {
        // G^0 = 1/2 gamma^0_{11} (y^1)^2 = 1/2 (-sin cos)(pi/4) = -1/4.
        let m = MetricModel::sphere_chart(1.0).unwrap();
        let pt = m
            .point(vec![std::f64::consts::FRAC_PI_4, 0.0], vec![0.0, 1.0])
            .unwrap();
        let g = spray(&m, &pt).unwrap();
        assert!((g[0] + 0.25).abs() < 1e-12, "spray {g:?}");
        assert!(g[1].abs() < 1e-12);
    }

    #[test]
    fn spray_equals_christoffel_contraction() {
        // The energy-form spray must match 1/2 gamma^a_{bc} y^b y^c.
        let m = randers_model();
        let pt = m.point(vec![0.1, -0.2, 0.4], vec![1.1, -0.7, 0.6]).unwrap();
        let g = spray(&m, &pt).unwrap();
        let gamma = christoffel(&m, &pt).unwrap();
        for a in 0..3 {
            let mut want = 0.0;
            for b in 0..3 {
                for c in 0..3 {
                    want += gamma[a][b][c] * pt.y[b] * pt.y[c];
                }
            }
            want *= 0.5;
            assert!(
                (g[a] - want).abs() < 1e-10 * (1.0 + want.abs()),
                "spray[{a}] = {} vs contraction {want}",
                g[a]
            );
        }
    }

    #[test]
    fn riemannian_reduction_collapses_vertical_blocks() {
        let m = MetricModel::sphere_chart(1.0).unwrap();
        let pt = m.point(vec![0.9, -0.4], vec![0.8, 0.6]).unwrap();
        let blocks = cartan_metrical_connection(&m, &pt).unwrap();
        assert!(max3(&blocks.c01) < 1e-12, "quadratic energy kills C01");
        let gamma = christoffel(&m, &pt).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert!(
                        (blocks.l00[a][b][c] - gamma[a][b][c]).abs() < 1e-11,
                        "L00 reduces to Levi-Civita"
                    );
                }
            }
        }
        // N^a_b = gamma^a_{bc} y^c when the Christoffels are y-independent.
        let nl = cartan_nonlinear_connection(&m, &pt).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let want: f64 = (0..2).map(|c| gamma[a][b][c] * pt.y[c]).sum();
                assert!((nl.n[a][b] - want).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn sphere_sectional_curvature_is_unity() {
        let m = MetricModel::sphere_chart(1.0).unwrap();
        let pt = m.point(vec![0.85, 0.2], vec![0.9, -0.3]).unwrap();
        let curv = curvature_tensors(&m, &pt).unwrap();
        let at = m.metric_at(&pt).unwrap();
        let k = sectional_plane01(&at.g, &curv.rh);
        assert!((k - 1.0).abs() < 1e-9, "sectional curvature {k}");
    }

    #[test]
    fn bracket_matches_riemann_contraction_on_quadratic_charts() {
        let m = MetricModel::sphere_chart(1.0).unwrap();
        let x = vec![1.1, -0.5];
        let y = vec![0.7, 0.9];
        let pt = m.point(x.clone(), y.clone()).unwrap();
        let (r, _) = bracket_coefficients(&m, &pt).unwrap();
        let riem = fd_riemann(&m, &x).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let want: f64 = (0..2).map(|d| riem[a][d][b][c] * y[d]).sum();
                    assert!(
                        (r[a][b][c] - want).abs() < 1e-5,
                        "bracket[{a}][{b}][{c}] = {} vs contracted Riemann {want}",
                        r[a][b][c]
                    );
                }
            }
        }
    }

    #[test]
    fn delta_derivative_annihilates_the_energy() {
        // Horizontal derivatives of the squared norm vanish (metricity of
        // the canonical nonlinear connection).
        for m in [MetricModel::sphere_chart(1.0).unwrap(), randers_model()] {
            let n = m.dim();
            let x: Vec<f64> = (0..n).map(|i| 0.6 + 0.2 * i as f64).collect();
            let y: Vec<f64> = (0..n).map(|i| 1.0 - 0.3 * i as f64).collect();
            let pt = m.point(x, y).unwrap();
            let de = delta_derivative(&m, &pt, m.energy()).unwrap();
            for v in de {
                assert!(v.abs() < 1e-9, "delta F^2 = {v}");
            }
        }
    }

    #[test]
    fn delta_derivative_reduces_to_plain_derivative_when_flat() {
        let m = MetricModel::euclidean(2, 1.0).unwrap();
        let f = ScalarField::new(2, 2, |x, y| &(&x[0] * &x[1]).sin() + &(&y[0] * &x[1]));
        let pt = m.point(vec![0.3, 0.8], vec![1.0, -0.5]).unwrap();
        let de = delta_derivative(&m, &pt, &f).unwrap();
        let d0 = crate::field::partial(&f, &pt.x, &pt.y, &[0]);
        let d1 = crate::field::partial(&f, &pt.x, &pt.y, &[1]);
        assert!((de[0] - d0).abs() < 1e-12);
        assert!((de[1] - d1).abs() < 1e-12);
    }

    #[test]
    fn metricity_holds_for_all_builtin_models() {
        let models = [
            MetricModel::euclidean(3, 1.0).unwrap(),
            MetricModel::sphere_chart(1.0).unwrap(),
            randers_model(),
        ];
        for m in models {
            let n = m.dim();
            let x: Vec<f64> = (0..n).map(|i| 0.7 + 0.15 * i as f64).collect();
            let y: Vec<f64> = (0..n).map(|i| 0.9 - 0.4 * i as f64).collect();
            let pt = m.point(x, y).unwrap();
            let bj = BundleJets::at_point(&m, &pt).unwrap();
            for (i, r) in metricity_residuals(&bj).iter().enumerate() {
                assert!(r < &1e-9, "{} metricity identity {i}: residual {r}", m.label());
            }
        }
    }

    #[test]
    fn kronecker_field_is_parallel() {
        let m = randers_model();
        let pt = m.point(vec![0.1, 0.2, -0.3], vec![0.8, 1.1, -0.6]).unwrap();
        let field = TensorField {
            typing: vec![IndexType::up_h(), IndexType::low_h()],
            eval: Arc::new(|x: &[Jet], _y: &[Jet]| {
                let sp = x[0].space().clone();
                let n = x.len();
                JetTensor::from_fn(vec![n, n], |idx| {
                    Jet::constant(&sp, if idx[0] == idx[1] { 1.0 } else { 0.0 })
                })
            }),
        };
        for dir in [DerivDirection::Horizontal, DerivDirection::Vertical] {
            let d = covariant_derivative(&m, &pt, &field, dir).unwrap();
            assert!(d.max_abs() < 1e-11, "Kronecker delta parallel ({dir:?})");
        }
    }

    #[test]
    fn curvature_formula_agrees_with_commutator_oracle() {
        let models = [
            MetricModel::euclidean(3, 1.0).unwrap(),
            MetricModel::sphere_chart(1.0).unwrap(),
            randers_model(),
        ];
        for m in models {
            let n = m.dim();
            let x: Vec<f64> = (0..n).map(|i| 0.8 - 0.25 * i as f64).collect();
            let y: Vec<f64> = (0..n).map(|i| 1.2 - 0.5 * i as f64).collect();
            let pt = m.point(x, y).unwrap();
            let formula = curvature_tensors(&m, &pt).unwrap();
            let oracle = commutator_curvature_oracle(&m, &pt).unwrap();
            for ((name, f), (_, o)) in formula.blocks().iter().zip(oracle.blocks().iter()) {
                let scale = 1.0 + f.max_abs().max(o.max_abs());
                let d = diff4(f, o) / scale;
                assert!(
                    d < 1e-10,
                    "{}: block {name} formula-vs-oracle relative gap {d}",
                    m.label()
                );
            }
        }
    }

    #[test]
    fn connection_blocks_have_expected_homogeneity() {
        let m = randers_model();
        let x = vec![0.2, -0.1, 0.5];
        let y = vec![1.1, -0.8, 0.7];
        let base_pt = m.point(x.clone(), y.clone()).unwrap();
        let base_nl = cartan_nonlinear_connection(&m, &base_pt).unwrap();
        let base_blocks = cartan_metrical_connection(&m, &base_pt).unwrap();
        for lambda in [0.5, 2.0] {
            let ys: Vec<f64> = y.iter().map(|v| v * lambda).collect();
            let pt = m.point(x.clone(), ys).unwrap();
            let nl = cartan_nonlinear_connection(&m, &pt).unwrap();
            let blocks = cartan_metrical_connection(&m, &pt).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    let want = lambda * base_nl.n[a][b];
                    assert!(
                        (nl.n[a][b] - want).abs() < 1e-10 * (1.0 + want.abs()),
                        "N degree 1"
                    );
                    for c in 0..3 {
                        let w0 = base_blocks.l00[a][b][c];
                        assert!(
                            (blocks.l00[a][b][c] - w0).abs() < 1e-10 * (1.0 + w0.abs()),
                            "L00 degree 0"
                        );
                        let wm1 = base_blocks.c01[a][b][c] / lambda;
                        assert!(
                            (blocks.c01[a][b][c] - wm1).abs() < 1e-10 * (1.0 + wm1.abs()),
                            "C01 degree -1"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn torsion_structure_blocks_vanish_or_antisymmetrize() {
        let m = randers_model();
        let pt = m.point(vec![0.3, 0.1, -0.2], vec![0.9, 1.3, -0.4]).unwrap();
        let tor = torsion_tensors(&m, &pt).unwrap();
        assert!(max3(&tor.t00) < 1e-11, "symmetric L00 kills T00");
        assert!(max3(&tor.s11) < 1e-11, "symmetric C11 kills S11");
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    assert!((tor.r01[a][b][c] + tor.r01[a][c][b]).abs() < 1e-10);
                }
            }
        }
    }
}
