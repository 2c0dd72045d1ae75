//! Immersed submanifolds of a Finsler chart.
//!
//! A parametric map `x = x(u)` from an `m`-chart into the ambient `n`-chart
//! lifts to the bundle as `(u, v) -> (x(u), B(u) v)` with `B = dx/du`. Along
//! that lift this module constructs the adapted frame (tangent columns, a
//! metric-orthonormal normal completion, and both dual frames), the induced
//! metric and nonlinear connection, the coupling blocks that differentiate
//! ambient-indexed fields along submanifold directions, the tangent and
//! normal connection blocks, and a covariant derivative for tensors with
//! mixed ambient/tangent/normal legs.
//!
//! Everything is built in a single jet space whose variables are the
//! submanifold coordinates `(u, v)` followed by ambient probe displacements
//! for the chart and fiber slots. The ambient pipeline keeps its probe
//! dependence (so ambient partial derivatives stay addressable); induced
//! objects are restricted to the lifted section and depend on `(u, v)` only,
//! which makes their own adapted derivatives one more jet derivative away.

use std::sync::Arc;

use crate::ambient::{
    bundle_jets, delta_deriv, BundleJets, ChartVars, ConnBlocksAtPoint, ConnJets, DerivDirection,
    IndexFamily, JBlock,
};
use crate::error::{Error, Result};
use crate::jet::{self, Jet, JetSpace};
use crate::linalg::{
    invert, jmat, mat_mul, mat_vec, transpose, values2, FloatTensor, JMat, JetTensor,
};
use crate::metric::{det_f64, AmbientPoint, MetricModel, EPS_DET};

/// Taylor order of the private chart-map expansion; one above the shared jet
/// order so second derivatives of the map still carry enough coefficients.
pub(crate) const EMBED_ORDER: usize = 5;

/// Reject frames whose best Gram-Schmidt rejection norm drops below this.
const EPS_FRAME: f64 = 1e-10;

/// Reject immersions whose parameter Gram determinant drops below this.
const EPS_RANK: f64 = 1e-10;

/// Parametric embedding `x = x(u)` of an `m`-chart into the ambient `n`-chart.
///
/// The map is a jet-polymorphic closure, so one definition yields values,
/// differentials and second differentials alike.
#[derive(Clone)]
pub struct Immersion {
    m: usize,
    n: usize,
    label: String,
    map: Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>,
    u_box: Vec<(f64, f64)>,
}

impl Immersion {
    /// Wraps a chart map after validating `1 < m < n` and the parameter box.
    pub fn new(
        m: usize,
        n: usize,
        label: &str,
        u_box: Vec<(f64, f64)>,
        map: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Result<Immersion> {
        if m < 2 || m >= n {
            return Err(Error::Dimension(format!(
                "immersion needs 1 < m < n, got m = {m}, n = {n}"
            )));
        }
        if u_box.len() != m || u_box.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::Dimension(format!(
                "parameter box must consist of {m} nonempty intervals"
            )));
        }
        let imm = Immersion { m, n, label: label.to_string(), map: Arc::new(map), u_box };
        let center: Vec<f64> =
            imm.u_box.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        if imm.expand(&center, 1).len() != n {
            return Err(Error::Dimension(format!(
                "immersion map must produce {n} ambient coordinates"
            )));
        }
        Ok(imm)
    }

    /// Coordinate inclusion `x = (u^0, .., u^{m-1}, 0, ..)`.
    pub fn plane(m: usize, n: usize) -> Result<Immersion> {
        Immersion::new(m, n, "plane", vec![(-2.0, 2.0); m], move |u| {
            let sp = u[0].space().clone();
            (0..n)
                .map(|a| if a < m { u[a].clone() } else { Jet::constant(&sp, 0.0) })
                .collect()
        })
    }

    /// Linear subspace `x = A u` for an n-by-m coefficient matrix.
    pub fn linear(a: Vec<Vec<f64>>, u_box: Vec<(f64, f64)>) -> Result<Immersion> {
        let n = a.len();
        let m = a.first().map_or(0, |row| row.len());
        if m == 0 || a.iter().any(|row| row.len() != m) {
            return Err(Error::Dimension(
                "linear immersion needs a rectangular n-by-m matrix".into(),
            ));
        }
        Immersion::new(m, n, "linear", u_box, move |u| {
            let sp = u[0].space().clone();
            a.iter()
                .map(|row| {
                    let mut acc = Jet::constant(&sp, 0.0);
                    for (al, &c) in row.iter().enumerate() {
                        if c != 0.0 {
                            acc = &acc + &u[al].scale(c);
                        }
                    }
                    acc
                })
                .collect()
        })
    }

    /// Unit sphere in a 3-chart, polar angle `u^0` kept away from the poles.
    pub fn sphere2() -> Result<Immersion> {
        Immersion::new(2, 3, "sphere2", vec![(0.4, 2.7), (-2.5, 2.5)], |u| {
            vec![&u[0].sin() * &u[1].cos(), &u[0].sin() * &u[1].sin(), u[0].cos()]
        })
    }

    /// Graph surface `x = (u^0, u^1, u^0 u^1)` in a 3-chart.
    pub fn graph() -> Result<Immersion> {
        Immersion::new(2, 3, "graph", vec![(-1.5, 1.5), (-1.5, 1.5)], |u| {
            vec![u[0].clone(), u[1].clone(), &u[0] * &u[1]]
        })
    }

    /// Cylinder `x = (cos u^0, sin u^0, u^1)` in a 3-chart.
    pub fn cylinder() -> Result<Immersion> {
        Immersion::new(2, 3, "cylinder", vec![(-3.0, 3.0), (-2.0, 2.0)], |u| {
            vec![u[0].cos(), u[0].sin(), u[1].clone()]
        })
    }

    /// Parameter dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Short display name.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Per-parameter sampling intervals.
    pub fn u_box(&self) -> &[(f64, f64)] {
        &self.u_box
    }

    /// Applies the chart map to caller-supplied jets.
    pub fn chart_jets(&self, u: &[Jet]) -> Vec<Jet> {
        (self.map)(u)
    }

    /// Taylor-expands the chart map around `u` in a fresh m-variable space.
    pub fn expand(&self, u: &[f64], order: usize) -> Vec<Jet> {
        assert_eq!(u.len(), self.m, "parameter point dimension");
        let sp = jet::space(self.m, order);
        let uj: Vec<Jet> =
            u.iter().enumerate().map(|(al, &val)| Jet::variable(&sp, al, val)).collect();
        (self.map)(&uj)
    }

    /// Chart values `x(u)`.
    pub fn chart_values(&self, u: &[f64]) -> Vec<f64> {
        self.expand(u, 1).iter().map(Jet::value).collect()
    }
}

/// A point of the lifted parameter bundle: base coordinates and fiber
/// direction in the parameter chart.
#[derive(Clone, Debug)]
pub struct SubPoint {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Adapted frame at one point, in value form.
///
/// `b` holds the tangent columns `B^a_al = dx^a/du^al`, `b2` their parameter
/// derivatives, `bbar` the metric-orthonormal normal columns, `bdual` and
/// `bbardual` the dual rows, and `k` the normal-valued coefficients pairing
/// the fiber cobasis with base directions.
#[derive(Clone, Debug)]
pub struct FrameAtPoint {
    pub b: Vec<Vec<f64>>,
    pub b2: Vec<Vec<Vec<f64>>>,
    pub bbar: Vec<Vec<f64>>,
    pub bdual: Vec<Vec<f64>>,
    pub bbardual: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
}

/// Which space a mixed tensor index runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexSpace {
    /// Ambient chart index, dimension `n`.
    Ambient,
    /// Submanifold tangent index, dimension `m`.
    Tangent,
    /// Normal-frame index, dimension `n - m`.
    Normal,
}

/// Full declaration of one index of a mixed tensor: variance, the space it
/// runs over, and the family block that corrects it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MixedIndex {
    pub upper: bool,
    pub space: IndexSpace,
    pub family: IndexFamily,
}

impl MixedIndex {
    pub const fn new(upper: bool, space: IndexSpace, family: IndexFamily) -> MixedIndex {
        MixedIndex { upper, space, family }
    }
}

/// Tensor field over the lifted section with mixed index spaces. The closure
/// receives the `(u, v)` variable jets and must return matching dimensions.
pub struct MixedField {
    pub typing: Vec<MixedIndex>,
    pub eval: Arc<dyn Fn(&[Jet], &[Jet]) -> JetTensor + Send + Sync>,
}

/// Evaluates the chart map and its differential, with a rank guard.
fn chart_with_differential(
    imm: &Immersion,
    u: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let ex = imm.expand(u, 1);
    let x: Vec<f64> = ex.iter().map(Jet::value).collect();
    let b: Vec<Vec<f64>> = ex
        .iter()
        .map(|j| (0..imm.m).map(|al| j.deriv(al).value()).collect())
        .collect();
    let mut gram = vec![vec![0.0; imm.m]; imm.m];
    for al in 0..imm.m {
        for be in 0..imm.m {
            gram[al][be] = (0..imm.n).map(|a| b[a][al] * b[a][be]).sum();
        }
    }
    let det = det_f64(&gram);
    if det.abs() < EPS_RANK {
        return Err(Error::RankDeficient { det, u: u.to_vec() });
    }
    Ok((x, b))
}

/// Lifts a parameter-bundle point to the ambient bundle: `x = x(u)`,
/// `y = B(u) v`. Fails on rank loss or a lift too close to the null section.
pub fn lift_point(model: &MetricModel, imm: &Immersion, pt: &SubPoint) -> Result<AmbientPoint> {
    check_shapes(model, imm, pt)?;
    let (x, b) = chart_with_differential(imm, &pt.u)?;
    let y: Vec<f64> = (0..imm.n)
        .map(|a| (0..imm.m).map(|al| b[a][al] * pt.v[al]).sum())
        .collect();
    model.point(x, y)
}

fn check_shapes(model: &MetricModel, imm: &Immersion, pt: &SubPoint) -> Result<()> {
    if model.dim() != imm.n {
        return Err(Error::Dimension(format!(
            "immersion targets dimension {} but the metric chart has dimension {}",
            imm.n,
            model.dim()
        )));
    }
    if pt.u.len() != imm.m || pt.v.len() != imm.m {
        return Err(Error::Dimension(format!(
            "submanifold point needs {m} base and {m} fiber coordinates",
            m = imm.m
        )));
    }
    Ok(())
}

/// Jet-level state at one submanifold point: the ambient bundle along the
/// lift, the adapted frame, and every induced connection block.
///
/// Field jets share [`SubContext::space`]; those listed as restricted depend
/// on `(u, v)` only. Connection blocks all carry the submanifold direction as
/// their last index.
pub struct SubContext {
    pub model: MetricModel,
    pub imm: Immersion,
    pub point: SubPoint,
    pub m: usize,
    pub n: usize,
    pub space: Arc<JetSpace>,
    /// Probe slots addressing ambient chart/fiber derivatives.
    pub cv_amb: ChartVars,
    /// Variable slots addressing submanifold base/fiber derivatives.
    pub cv_sub: ChartVars,
    probe_vars: Vec<usize>,
    pub u_jets: Vec<Jet>,
    pub v_jets: Vec<Jet>,
    /// The lifted ambient point.
    pub lift: AmbientPoint,
    /// Ambient pipeline along the lift, probe dependence intact.
    pub bundle: BundleJets,
    /// Ambient fundamental tensor restricted to the section.
    pub g: JMat,
    pub g_inv: JMat,
    /// Restricted squared fiber norm `g_ab y^a y^b`.
    pub norm_sq: Jet,
    /// Restricted ambient nonlinear connection.
    pub n_amb: JMat,
    /// Restricted ambient connection blocks.
    pub conn_amb: ConnJets,
    /// Tangent columns, `n x m`, functions of `u` alone.
    pub b: JMat,
    /// Second parameter derivatives of the chart map, `[a][al][be]`.
    pub b2: Vec<JMat>,
    /// Normal columns, `n x (n - m)`, metric-orthonormal.
    pub bbar: JMat,
    /// Tangent dual rows, `m x n`.
    pub bdual: JMat,
    /// Normal dual rows, `(n - m) x n`.
    pub bbardual: JMat,
    /// Induced fundamental tensor and inverse, `m x m`.
    pub g_t: JMat,
    pub g_t_inv: JMat,
    /// Normal-valued fiber-velocity coefficients, `(n - m) x m`.
    pub k: JMat,
    /// Induced nonlinear connection, `m x m`.
    pub n_sub: JMat,
    /// Coupling blocks: ambient indices, submanifold direction, `n x n x m`.
    pub coupling: ConnJets,
    /// Tangent connection blocks, `m x m x m`.
    pub tangent: ConnJets,
    /// Normal connection blocks, `(n-m) x (n-m) x m`.
    pub normal: ConnJets,
}

impl SubContext {
    /// Builds the full apparatus at one parameter-bundle point.
    pub fn build(model: &MetricModel, imm: &Immersion, pt: &SubPoint) -> Result<SubContext> {
        check_shapes(model, imm, pt)?;
        let m = imm.m;
        let n = imm.n;
        let lift = lift_point(model, imm, pt)?;

        let sp = jet::space(2 * m + 2 * n, 4);
        let u_jets: Vec<Jet> = (0..m).map(|i| Jet::variable(&sp, i, pt.u[i])).collect();
        let v_jets: Vec<Jet> = (0..m).map(|i| Jet::variable(&sp, m + i, pt.v[i])).collect();
        let cv_sub = ChartVars { x: (0..m).collect(), y: (m..2 * m).collect() };
        let cv_amb = ChartVars {
            x: (2 * m..2 * m + n).collect(),
            y: (2 * m + n..2 * m + 2 * n).collect(),
        };
        let probe_vars: Vec<usize> = (2 * m..2 * m + 2 * n).collect();

        // One private expansion of the chart map feeds the embedding, its
        // differential and its second differential as (u, v)-space jets.
        let ex = imm.expand(&pt.u, EMBED_ORDER);
        let x_emb: Vec<Jet> = ex.iter().map(|j| j.compose(&u_jets)).collect();
        let b: JMat = jmat(n, m, |a, al| ex[a].deriv(al).compose(&u_jets));
        let b2: Vec<JMat> = (0..n)
            .map(|a| jmat(m, m, |al, be| ex[a].deriv(al).deriv(be).compose(&u_jets)))
            .collect();

        // Lifted evaluation point; additive probes keep the ambient chart
        // and fiber derivative slots addressable along the section.
        let x_eval: Vec<Jet> = (0..n)
            .map(|a| &x_emb[a] + &Jet::variable(&sp, cv_amb.x[a], 0.0))
            .collect();
        let y_eval: Vec<Jet> = (0..n)
            .map(|a| {
                let mut acc = Jet::variable(&sp, cv_amb.y[a], 0.0);
                for al in 0..m {
                    acc = &acc + &(&b[a][al] * &v_jets[al]);
                }
                acc
            })
            .collect();
        let bundle = bundle_jets(model.energy(), model.p(), &x_eval, &y_eval, cv_amb.clone())?;

        // Restriction to the section: probe monomials never influence pure
        // (u, v) coefficients, so dropping them commutes with all later
        // arithmetic and derivatives in the (u, v) slots.
        let res = |j: &Jet| j.without_vars(&probe_vars);
        let res2 = |mm: &JMat| -> JMat {
            mm.iter().map(|row| row.iter().map(res).collect()).collect()
        };
        let res3 = |blk: &JBlock| -> JBlock { blk.iter().map(res2).collect() };
        let g = res2(&bundle.g);
        let g_inv = res2(&bundle.g_inv);
        let norm_sq = res(&bundle.norm_sq);
        let n_amb = res2(&bundle.n_conn);
        let conn_amb = ConnJets {
            l00: res3(&bundle.conn.l00),
            l10: res3(&bundle.conn.l10),
            c01: res3(&bundle.conn.c01),
            c11: res3(&bundle.conn.c11),
        };

        // Induced metric and the tangent dual rows.
        let gb = mat_mul(&g, &b);
        let g_t = mat_mul(&transpose(&b), &gb);
        let (g_t_inv, det_t) = invert(&g_t);
        if det_t.abs() < EPS_DET {
            return Err(Error::DegenerateMetric {
                det: det_t,
                x: lift.x.clone(),
                y: lift.y.clone(),
            });
        }
        let bdual = mat_mul(&g_t_inv, &transpose(&gb));

        // Normal completion: greedy metric-orthonormalization of the
        // canonical basis against the tangent span, always taking the
        // largest remaining rejection (ties to the lowest index) so the
        // pivot pattern is reproducible.
        let zero = Jet::constant(&sp, 0.0);
        let gdot = |x: &[Jet], y: &[Jet]| -> Jet {
            let mut acc = zero.clone();
            for r in 0..n {
                for c in 0..n {
                    acc = &acc + &(&(&x[r] * &g[r][c]) * &y[c]);
                }
            }
            acc
        };
        let mut cands: Vec<Vec<Jet>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|r| Jet::constant(&sp, if r == a { 1.0 } else { 0.0 }))
                    .collect()
            })
            .collect();
        let mut normals: Vec<Vec<Jet>> = Vec::new();
        while normals.len() < n - m {
            let mut best: Option<(usize, f64, Vec<Jet>, Jet)> = None;
            for (pos, w) in cands.iter().enumerate() {
                let coef = mat_vec(&bdual, w);
                let mut r: Vec<Jet> = w.clone();
                for a in 0..n {
                    for al in 0..m {
                        r[a] = &r[a] - &(&b[a][al] * &coef[al]);
                    }
                }
                for nrm in &normals {
                    let c = gdot(&r, nrm);
                    for a in 0..n {
                        r[a] = &r[a] - &(&nrm[a] * &c);
                    }
                }
                let ns = gdot(&r, &r);
                let val = ns.value();
                if best.as_ref().map_or(true, |prev| val > prev.1) {
                    best = Some((pos, val, r, ns));
                }
            }
            let (pos, val, r, ns) = best.expect("candidate set nonempty");
            if val < EPS_FRAME {
                return Err(Error::RankDeficient { det: val, u: pt.u.clone() });
            }
            let inv_len = ns.sqrt().recip();
            normals.push(r.iter().map(|j| j * &inv_len).collect());
            cands.remove(pos);
        }
        let bbar: JMat = jmat(n, n - m, |a, ab| normals[ab][a].clone());
        let bbardual: JMat = jmat(n - m, n, |ab, a| {
            let mut acc = zero.clone();
            for c in 0..n {
                acc = &acc + &(&normals[ab][c] * &g[c][a]);
            }
            acc
        });

        // Fiber velocity of the lift split through the frame: the tangent
        // part is the induced nonlinear connection, the normal part `k`.
        let b0: JMat = jmat(n, m, |a, be| {
            let mut acc = zero.clone();
            for al in 0..m {
                acc = &acc + &(&b2[a][al][be] * &v_jets[al]);
            }
            acc
        });
        let w: JMat = jmat(n, m, |a, be| {
            let mut acc = b0[a][be].clone();
            for c in 0..n {
                acc = &acc + &(&n_amb[a][c] * &b[c][be]);
            }
            acc
        });
        let k = mat_mul(&bbardual, &w);
        let n_sub = mat_mul(&bdual, &w);

        let bk = mat_mul(&bbar, &k);
        let coupling = coupling_blocks(&conn_amb, &b, &bk);
        let tangent = tangent_blocks(&b, &b2, &bdual, &coupling);
        let normal = normal_blocks(&bbar, &bbardual, &coupling, &n_sub, &cv_sub);

        Ok(SubContext {
            model: model.clone(),
            imm: imm.clone(),
            point: pt.clone(),
            m,
            n,
            space: sp,
            cv_amb,
            cv_sub,
            probe_vars,
            u_jets,
            v_jets,
            lift,
            bundle,
            g,
            g_inv,
            norm_sq,
            n_amb,
            conn_amb,
            b,
            b2,
            bbar,
            bdual,
            bbardual,
            g_t,
            g_t_inv,
            k,
            n_sub,
            coupling,
            tangent,
            normal,
        })
    }

    /// Restricts any jet of the shared space to the lifted section.
    pub fn restrict(&self, j: &Jet) -> Jet {
        j.without_vars(&self.probe_vars)
    }

    /// Adapted scalar derivative of a restricted `(u, v)`-field: horizontal
    /// uses the induced nonlinear connection, vertical the bare fiber slot.
    pub fn adapted_deriv(&self, j: &Jet, de: usize, dir: DerivDirection) -> Jet {
        match dir {
            DerivDirection::Horizontal => delta_deriv(j, de, &self.cv_sub, &self.n_sub),
            DerivDirection::Vertical => j.deriv(self.cv_sub.y[de]),
        }
    }

    /// Value form of the frame.
    pub fn frame_at_point(&self) -> FrameAtPoint {
        FrameAtPoint {
            b: values2(&self.b),
            b2: self.b2.iter().map(|mm| values2(mm)).collect(),
            bbar: values2(&self.bbar),
            bdual: values2(&self.bdual),
            bbardual: values2(&self.bbardual),
            k: values2(&self.k),
        }
    }

    /// Coupling blocks in value form.
    pub fn coupling_values(&self) -> ConnBlocksAtPoint {
        self.coupling.values()
    }

    /// Tangent blocks in value form.
    pub fn tangent_values(&self) -> ConnBlocksAtPoint {
        self.tangent.values()
    }

    /// Normal blocks in value form.
    pub fn normal_values(&self) -> ConnBlocksAtPoint {
        self.normal.values()
    }

    /// Normal blocks recomputed with a caller-supplied nonlinear connection
    /// driving the horizontal frame derivative (sensitivity variant).
    pub fn normal_blocks_with(&self, n_for_delta: &JMat) -> ConnJets {
        normal_blocks(&self.bbar, &self.bbardual, &self.coupling, n_for_delta, &self.cv_sub)
    }

    fn dim_of(&self, space: IndexSpace) -> usize {
        match space {
            IndexSpace::Ambient => self.n,
            IndexSpace::Tangent => self.m,
            IndexSpace::Normal => self.n - self.m,
        }
    }

    fn block_for(&self, space: IndexSpace, fam: IndexFamily, dir: DerivDirection) -> &JBlock {
        let set = match space {
            IndexSpace::Ambient => &self.coupling,
            IndexSpace::Tangent => &self.tangent,
            IndexSpace::Normal => &self.normal,
        };
        match (dir, fam) {
            (DerivDirection::Horizontal, IndexFamily::Horizontal) => &set.l00,
            (DerivDirection::Horizontal, IndexFamily::Vertical) => &set.l10,
            (DerivDirection::Vertical, IndexFamily::Horizontal) => &set.c01,
            (DerivDirection::Vertical, IndexFamily::Vertical) => &set.c11,
        }
    }

    /// Covariant derivative of a mixed tensor field along submanifold
    /// directions. Ambient legs ride the coupling blocks, tangent legs the
    /// tangent blocks, normal legs the normal blocks; the derivative
    /// direction is appended as the last (submanifold) index.
    pub fn relative_covariant_derivative(
        &self,
        field: &MixedField,
        dir: DerivDirection,
    ) -> FloatTensor {
        let tensor = (field.eval)(&self.u_jets, &self.v_jets);
        assert_eq!(tensor.dims.len(), field.typing.len(), "typing arity mismatch");
        for (axis, ty) in field.typing.iter().enumerate() {
            assert_eq!(
                tensor.dims[axis],
                self.dim_of(ty.space),
                "axis {axis} dimension does not match its declared index space"
            );
        }
        let mut dims = tensor.dims.clone();
        dims.push(self.m);
        let mut out = FloatTensor::zeros(dims);
        let rank = field.typing.len();
        let mut idx = vec![0usize; rank];
        let total: usize = tensor.dims.iter().product::<usize>().max(1);
        for flat in 0..total {
            let mut rem = flat;
            for axis in (0..rank).rev() {
                idx[axis] = rem % tensor.dims[axis];
                rem /= tensor.dims[axis];
            }
            for de in 0..self.m {
                let entry = tensor.get(&idx);
                let mut val = self.adapted_deriv(entry, de, dir).value();
                for (axis, ty) in field.typing.iter().enumerate() {
                    let blk = self.block_for(ty.space, ty.family, dir);
                    let own = idx[axis];
                    let mut swapped = idx.clone();
                    for f in 0..self.dim_of(ty.space) {
                        swapped[axis] = f;
                        let neighbor = tensor.get(&swapped).value();
                        if ty.upper {
                            val += blk[own][f][de].value() * neighbor;
                        } else {
                            val -= blk[f][own][de].value() * neighbor;
                        }
                    }
                }
                let mut oidx = idx.clone();
                oidx.push(de);
                out.set(&oidx, val);
            }
        }
        out
    }

    /// Residuals of the frame algebra at the point, as max-abs values:
    /// tangent duality, dual-tangent against normals, tangent-dual against
    /// normals, normal duality, completeness, and metric orthogonality of
    /// tangent and normal columns.
    pub fn duality_residuals(&self) -> [f64; 6] {
        let m = self.m;
        let n = self.n;
        let q = n - m;
        let b = values2(&self.b);
        let bbar = values2(&self.bbar);
        let bd = values2(&self.bdual);
        let bbd = values2(&self.bbardual);
        let g = values2(&self.g);
        let mut r = [0.0f64; 6];
        for al in 0..m {
            for be in 0..m {
                let dot: f64 = (0..n).map(|a| bd[al][a] * b[a][be]).sum();
                let target = if al == be { 1.0 } else { 0.0 };
                r[0] = r[0].max((dot - target).abs());
            }
        }
        for ab in 0..q {
            for be in 0..m {
                let dot: f64 = (0..n).map(|a| bbd[ab][a] * b[a][be]).sum();
                r[1] = r[1].max(dot.abs());
            }
        }
        for al in 0..m {
            for ab in 0..q {
                let dot: f64 = (0..n).map(|a| bd[al][a] * bbar[a][ab]).sum();
                r[2] = r[2].max(dot.abs());
            }
        }
        for ab in 0..q {
            for cb in 0..q {
                let dot: f64 = (0..n).map(|a| bbd[ab][a] * bbar[a][cb]).sum();
                let target = if ab == cb { 1.0 } else { 0.0 };
                r[3] = r[3].max((dot - target).abs());
            }
        }
        for a in 0..n {
            for c in 0..n {
                let mut dot: f64 = (0..m).map(|al| b[a][al] * bd[al][c]).sum();
                dot += (0..q).map(|ab| bbar[a][ab] * bbd[ab][c]).sum::<f64>();
                let target = if a == c { 1.0 } else { 0.0 };
                r[4] = r[4].max((dot - target).abs());
            }
        }
        for al in 0..m {
            for ab in 0..q {
                let mut dot = 0.0;
                for a in 0..n {
                    for c in 0..n {
                        dot += g[a][c] * b[a][al] * bbar[c][ab];
                    }
                }
                r[5] = r[5].max(dot.abs());
            }
        }
        r
    }

    /// Pushes one parameter-bundle direction through both decompositions of
    /// the restricted fiber cobasis and returns the largest mismatch:
    /// the ambient `dy + N dx` along the lifted direction against its
    /// frame image under the induced `dv + N du` and the `k`-coupling.
    pub fn cobasis_restriction_residual(&self, du: &[f64], dv: &[f64]) -> f64 {
        assert_eq!(du.len(), self.m, "du dimension");
        assert_eq!(dv.len(), self.m, "dv dimension");
        let m = self.m;
        let n = self.n;
        let q = n - m;
        let b = values2(&self.b);
        let bbar = values2(&self.bbar);
        let k = values2(&self.k);
        let n_amb = values2(&self.n_amb);
        let n_sub = values2(&self.n_sub);
        let v = &self.point.v;
        let xdot: Vec<f64> = (0..n)
            .map(|c| (0..m).map(|be| b[c][be] * du[be]).sum())
            .collect();
        let mut worst = 0.0f64;
        for a in 0..n {
            let mut ydot: f64 = (0..m).map(|al| b[a][al] * dv[al]).sum();
            for al in 0..m {
                for be in 0..m {
                    ydot += self.b2[a][al][be].value() * v[al] * du[be];
                }
            }
            let mut lhs = ydot;
            for c in 0..n {
                lhs += n_amb[a][c] * xdot[c];
            }
            let mut rhs = 0.0;
            for al in 0..m {
                let dv_adapted: f64 =
                    dv[al] + (0..m).map(|be| n_sub[al][be] * du[be]).sum::<f64>();
                rhs += b[a][al] * dv_adapted;
            }
            for ab in 0..q {
                for be in 0..m {
                    rhs += bbar[a][ab] * k[ab][be] * du[be];
                }
            }
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }
}

/// Coupling blocks: ambient connection blocks contracted onto submanifold
/// directions, the horizontal ones picking up the normal fiber-velocity
/// correction through `bk = bbar k`.
fn coupling_blocks(conn_amb: &ConnJets, b: &JMat, bk: &JMat) -> ConnJets {
    let n = b.len();
    let m = b[0].len();
    let with_k = |l_blk: &JBlock, c_blk: &JBlock| -> JBlock {
        crate::linalg::jcube(n, n, m, |a, bb, de| {
            let mut acc = &l_blk[a][bb][0] * &b[0][de];
            acc = &acc + &(&c_blk[a][bb][0] * &bk[0][de]);
            for d in 1..n {
                acc = &acc + &(&l_blk[a][bb][d] * &b[d][de]);
                acc = &acc + &(&c_blk[a][bb][d] * &bk[d][de]);
            }
            acc
        })
    };
    let plain = |c_blk: &JBlock| -> JBlock {
        crate::linalg::jcube(n, n, m, |a, bb, de| {
            let mut acc = &c_blk[a][bb][0] * &b[0][de];
            for d in 1..n {
                acc = &acc + &(&c_blk[a][bb][d] * &b[d][de]);
            }
            acc
        })
    };
    ConnJets {
        l00: with_k(&conn_amb.l00, &conn_amb.c01),
        l10: with_k(&conn_amb.l10, &conn_amb.c11),
        c01: plain(&conn_amb.c01),
        c11: plain(&conn_amb.c11),
    }
}

/// Tangent blocks: dual-projected coupling transport of the tangent columns,
/// the horizontal ones carrying the second differential of the chart map.
fn tangent_blocks(b: &JMat, b2: &[JMat], bdual: &JMat, coupling: &ConnJets) -> ConnJets {
    let n = b.len();
    let m = b[0].len();
    let zero = Jet::constant(b[0][0].space(), 0.0);
    let build = |blk: &JBlock, with_b2: bool| -> JBlock {
        crate::linalg::jcube(m, m, m, |al, be, de| {
            let mut acc = zero.clone();
            for d in 0..n {
                let mut inner =
                    if with_b2 { b2[d][be][de].clone() } else { zero.clone() };
                for f in 0..n {
                    inner = &inner + &(&b[f][be] * &blk[d][f][de]);
                }
                acc = &acc + &(&bdual[al][d] * &inner);
            }
            acc
        })
    };
    ConnJets {
        l00: build(&coupling.l00, true),
        l10: build(&coupling.l10, true),
        c01: build(&coupling.c01, false),
        c11: build(&coupling.c11, false),
    }
}

/// Normal blocks: dual-projected coupling transport of the normal columns,
/// horizontal ones differentiating the frame with the supplied nonlinear
/// connection, vertical ones with the bare fiber slots.
fn normal_blocks(
    bbar: &JMat,
    bbardual: &JMat,
    coupling: &ConnJets,
    n_for_delta: &JMat,
    cv_sub: &ChartVars,
) -> ConnJets {
    let n = bbar.len();
    let q = bbar[0].len();
    let m = n_for_delta.len();
    let zero = Jet::constant(bbar[0][0].space(), 0.0);
    let build = |blk: &JBlock, dir: DerivDirection| -> JBlock {
        crate::linalg::jcube(q, q, m, |al, be, de| {
            let mut acc = zero.clone();
            for d in 0..n {
                let mut inner = match dir {
                    DerivDirection::Horizontal => {
                        delta_deriv(&bbar[d][be], de, cv_sub, n_for_delta)
                    }
                    DerivDirection::Vertical => bbar[d][be].deriv(cv_sub.y[de]),
                };
                for f in 0..n {
                    inner = &inner + &(&bbar[f][be] * &blk[d][f][de]);
                }
                acc = &acc + &(&bbardual[al][d] * &inner);
            }
            acc
        })
    };
    ConnJets {
        l00: build(&coupling.l00, DerivDirection::Horizontal),
        l10: build(&coupling.l10, DerivDirection::Horizontal),
        c01: build(&coupling.c01, DerivDirection::Vertical),
        c11: build(&coupling.c11, DerivDirection::Vertical),
    }
}

/// Frame at a point, one-shot convenience.
pub fn build_frame(model: &MetricModel, imm: &Immersion, pt: &SubPoint) -> Result<FrameAtPoint> {
    Ok(SubContext::build(model, imm, pt)?.frame_at_point())
}

/// Induced fundamental tensor at a point.
pub fn induced_metric(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<Vec<Vec<f64>>> {
    Ok(values2(&SubContext::build(model, imm, pt)?.g_t))
}

/// Induced nonlinear connection at a point.
pub fn induced_nonlinear_connection(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<Vec<Vec<f64>>> {
    Ok(values2(&SubContext::build(model, imm, pt)?.n_sub))
}

/// Coupling blocks at a point.
pub fn coupling_coefficients(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<ConnBlocksAtPoint> {
    Ok(SubContext::build(model, imm, pt)?.coupling_values())
}

/// Tangent connection blocks at a point.
pub fn tangent_connection(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<ConnBlocksAtPoint> {
    Ok(SubContext::build(model, imm, pt)?.tangent_values())
}

/// Normal connection blocks at a point.
pub fn normal_connection(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<ConnBlocksAtPoint> {
    Ok(SubContext::build(model, imm, pt)?.normal_values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::MaxAbs;
    use proptest::prelude::*;

    fn randers_model() -> MetricModel {
        MetricModel::randers(
            vec![
                vec![1.0, 0.05, 0.0],
                vec![0.05, 1.2, 0.0],
                vec![0.0, 0.0, 0.9],
            ],
            vec![0.3, 0.0, -0.1],
            1.0,
        )
        .expect("valid randers data")
    }

    #[test]
    fn plane_lift_is_coordinate_inclusion() {
        let model = MetricModel::euclidean(3, 1.0).unwrap();
        let imm = Immersion::plane(2, 3).unwrap();
        let pt = SubPoint { u: vec![0.4, -0.7], v: vec![1.0, 2.0] };
        let amb = lift_point(&model, &imm, &pt).unwrap();
        assert_eq!(amb.x, vec![0.4, -0.7, 0.0]);
        assert_eq!(amb.y, vec![1.0, 2.0, 0.0]);
        let doubled =
            lift_point(&model, &imm, &SubPoint { u: pt.u.clone(), v: vec![2.0, 4.0] }).unwrap();
        for a in 0..3 {
            assert!((doubled.y[a] - 2.0 * amb.y[a]).abs() < 1e-15, "fiber linearity");
        }
    }

    #[test]
    fn sphere_lift_matches_fd_differential() {
        let model = MetricModel::euclidean(3, 1.0).unwrap();
        let imm = Immersion::sphere2().unwrap();
        let pt = SubPoint { u: vec![1.1, 0.6], v: vec![0.7, -0.4] };
        let amb = lift_point(&model, &imm, &pt).unwrap();
        let h = f64::EPSILON.powf(1.0 / 3.0);
        for a in 0..3 {
            let mut y_fd = 0.0;
            for al in 0..2 {
                let mut up = pt.u.clone();
                let mut dn = pt.u.clone();
                up[al] += h;
                dn[al] -= h;
                let d = (imm.chart_values(&up)[a] - imm.chart_values(&dn)[a]) / (2.0 * h);
                y_fd += d * pt.v[al];
            }
            assert!((amb.y[a] - y_fd).abs() < 1e-9, "fiber component {a}");
        }
    }

    #[test]
    fn degenerate_linear_map_is_rejected() {
        let imm = Immersion::linear(
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]],
            vec![(-1.0, 1.0), (-1.0, 1.0)],
        )
        .unwrap();
        let model = MetricModel::euclidean(3, 1.0).unwrap();
        let got = lift_point(&model, &imm, &SubPoint { u: vec![0.2, 0.3], v: vec![1.0, 0.0] });
        assert!(matches!(got, Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn curve_and_full_dimension_parameters_are_rejected() {
        assert!(Immersion::plane(1, 3).is_err());
        assert!(Immersion::plane(3, 3).is_err());
    }

    #[test]
    fn plane_in_euclidean_is_totally_geodesic() {
        let model = MetricModel::euclidean(3, 1.0).unwrap();
        let imm = Immersion::plane(2, 3).unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![0.3, -0.5], v: vec![1.1, 0.7] },
        )
        .unwrap();
        let f = ctx.frame_at_point();
        assert!((f.bbar[2][0].abs() - 1.0).abs() < 1e-13, "normal along third axis");
        assert!(f.bbar[0][0].abs() < 1e-13 && f.bbar[1][0].abs() < 1e-13);
        assert!(f.k.max_abs() < 1e-13);
        assert!(values2(&ctx.n_sub).max_abs() < 1e-13);
        let tan = ctx.tangent_values();
        assert!(tan.l00.max_abs() < 1e-13);
        assert!(tan.l10.max_abs() < 1e-13);
        assert!(tan.c01.max_abs() < 1e-13);
        let cpl = ctx.coupling_values();
        assert!(cpl.l00.max_abs() < 1e-13);
        assert!(cpl.c01.max_abs() < 1e-13);
        let nor = ctx.normal_values();
        assert!(nor.l00.max_abs() < 1e-13);
        assert!(nor.l10.max_abs() < 1e-13);
        assert!(nor.c01.max_abs() < 1e-13);
    }

    #[test]
    fn duality_and_completeness_hold_on_graph_in_randers() {
        let model = randers_model();
        let imm = Immersion::graph().unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![0.5, -0.8], v: vec![1.2, 0.4] },
        )
        .unwrap();
        for (i, r) in ctx.duality_residuals().iter().enumerate() {
            assert!(*r < 1e-11, "duality residual {i} = {r:.3e}");
        }
    }

    #[test]
    fn sphere_first_fundamental_form_is_round() {
        let model = MetricModel::euclidean(3, 1.0).unwrap();
        let imm = Immersion::sphere2().unwrap();
        let u = [1.0f64, 0.7];
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: u.to_vec(), v: vec![0.9, -0.3] },
        )
        .unwrap();
        let gt = values2(&ctx.g_t);
        let s = u[0].sin();
        assert!((gt[0][0] - 1.0).abs() < 1e-10);
        assert!(gt[0][1].abs() < 1e-10 && gt[1][0].abs() < 1e-10);
        assert!((gt[1][1] - s * s).abs() < 1e-10);
    }

    #[test]
    fn sphere_tangent_block_matches_round_christoffels() {
        let model = MetricModel::euclidean(3, 1.0).unwrap();
        let imm = Immersion::sphere2().unwrap();
        let u0 = 1.0f64;
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![u0, 0.7], v: vec![0.9, -0.3] },
        )
        .unwrap();
        let l00 = ctx.tangent_values().l00;
        // Classical values for the metric diag(1, sin^2 u0), frozen here.
        let expect = |a: usize, b: usize, c: usize| -> f64 {
            match (a, b, c) {
                (0, 1, 1) => -u0.sin() * u0.cos(),
                (1, 0, 1) | (1, 1, 0) => u0.cos() / u0.sin(),
                _ => 0.0,
            }
        };
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert!(
                        (l00[a][b][c] - expect(a, b, c)).abs() < 1e-8,
                        "component ({a},{b},{c}): {} vs {}",
                        l00[a][b][c],
                        expect(a, b, c)
                    );
                }
            }
        }
    }

    #[test]
    fn cylinder_normal_h_block_vanishes() {
        let model = MetricModel::euclidean(3, 1.0).unwrap();
        let imm = Immersion::cylinder().unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![0.8, -0.4], v: vec![0.6, 1.1] },
        )
        .unwrap();
        assert!(ctx.normal_values().l00.max_abs() < 1e-9);
    }

    #[test]
    fn normal_h_block_vanishes_on_randers_graph() {
        // Codimension one: metric-orthonormality of the normal column forces
        // the horizontal normal block to cancel between its frame-derivative
        // and coupling terms.
        let model = randers_model();
        let imm = Immersion::graph().unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![0.4, -0.6], v: vec![1.0, 0.5] },
        )
        .unwrap();
        assert!(ctx.normal_values().l00.max_abs() < 1e-9);
    }

    #[test]
    fn linear_slice_of_product_chart_has_vanishing_normal_velocity() {
        let model = MetricModel::sphere_product_chart(1.0).unwrap();
        let imm = Immersion::linear(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]],
            vec![(0.4, 2.7), (-2.5, 2.5)],
        )
        .unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![1.2, 0.5], v: vec![0.8, -0.6] },
        )
        .unwrap();
        assert!(values2(&ctx.k).max_abs() < 1e-12, "normal fiber velocity");
        let n_amb = values2(&ctx.n_amb);
        let n_sub = values2(&ctx.n_sub);
        for al in 0..2 {
            for be in 0..2 {
                assert!(
                    (n_sub[al][be] - n_amb[al][be]).abs() < 1e-12,
                    "induced nonlinear connection restricts the ambient one"
                );
            }
        }
    }

    #[test]
    fn metric_transport_along_lift_vanishes() {
        let model = randers_model();
        let imm = Immersion::graph().unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![0.4, -0.6], v: vec![1.0, 0.5] },
        )
        .unwrap();
        let g = ctx.g.clone();
        let n = ctx.n;
        let field = MixedField {
            typing: vec![
                MixedIndex::new(false, IndexSpace::Ambient, IndexFamily::Horizontal),
                MixedIndex::new(false, IndexSpace::Ambient, IndexFamily::Horizontal),
            ],
            eval: Arc::new(move |_u, _v| {
                JetTensor::from_fn(vec![n, n], |idx| g[idx[0]][idx[1]].clone())
            }),
        };
        let h = ctx.relative_covariant_derivative(&field, DerivDirection::Horizontal);
        let v = ctx.relative_covariant_derivative(&field, DerivDirection::Vertical);
        assert!(h.max_abs() < 1e-9, "horizontal transport {:.3e}", h.max_abs());
        assert!(v.max_abs() < 1e-9, "vertical transport {:.3e}", v.max_abs());
    }

    #[test]
    fn induced_metric_transport_vanishes_and_frame_derivative_is_normal() {
        let model = randers_model();
        let imm = Immersion::graph().unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![0.5, -0.8], v: vec![1.2, 0.4] },
        )
        .unwrap();
        let m = ctx.m;
        let n = ctx.n;
        let gt = ctx.g_t.clone();
        let gt_field = MixedField {
            typing: vec![
                MixedIndex::new(false, IndexSpace::Tangent, IndexFamily::Horizontal),
                MixedIndex::new(false, IndexSpace::Tangent, IndexFamily::Horizontal),
            ],
            eval: Arc::new(move |_u, _v| {
                JetTensor::from_fn(vec![m, m], |idx| gt[idx[0]][idx[1]].clone())
            }),
        };
        let trans = ctx.relative_covariant_derivative(&gt_field, DerivDirection::Horizontal);
        assert!(trans.max_abs() < 1e-8, "induced metric transport {:.3e}", trans.max_abs());

        let b = ctx.b.clone();
        let b_field = MixedField {
            typing: vec![
                MixedIndex::new(true, IndexSpace::Ambient, IndexFamily::Horizontal),
                MixedIndex::new(false, IndexSpace::Tangent, IndexFamily::Horizontal),
            ],
            eval: Arc::new(move |_u, _v| {
                JetTensor::from_fn(vec![n, m], |idx| b[idx[0]][idx[1]].clone())
            }),
        };
        let db = ctx.relative_covariant_derivative(&b_field, DerivDirection::Horizontal);
        let bdual = values2(&ctx.bdual);
        for be in 0..m {
            for al in 0..m {
                for de in 0..m {
                    let mut acc = 0.0;
                    for a in 0..n {
                        acc += bdual[be][a] * db.get(&[a, al, de]);
                    }
                    assert!(
                        acc.abs() < 1e-9,
                        "tangential part of the transported frame ({be},{al},{de})"
                    );
                }
            }
        }
    }

    #[test]
    fn scalar_relative_derivative_matches_adapted_derivatives() {
        let model = randers_model();
        let imm = Immersion::graph().unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![0.3, 0.9], v: vec![0.8, -0.5] },
        )
        .unwrap();
        // Scalar on the parameter bundle built from restricted data.
        let f = &ctx.norm_sq * &ctx.g_t[0][1];
        let field = MixedField {
            typing: vec![],
            eval: {
                let f = f.clone();
                Arc::new(move |_u, _v| JetTensor::from_fn(vec![], |_| f.clone()))
            },
        };
        for dir in [DerivDirection::Horizontal, DerivDirection::Vertical] {
            let got = ctx.relative_covariant_derivative(&field, dir);
            for de in 0..ctx.m {
                let want = ctx.adapted_deriv(&f, de, dir).value();
                assert!((got.get(&[de]) - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn fiber_cobasis_restriction_is_exact() {
        let model = randers_model();
        let imm = Immersion::graph().unwrap();
        let ctx = SubContext::build(
            &model,
            &imm,
            &SubPoint { u: vec![0.5, -0.8], v: vec![1.2, 0.4] },
        )
        .unwrap();
        let dirs = [
            (vec![0.3, -0.9], vec![1.1, 0.2]),
            (vec![1.0, 0.0], vec![0.0, 0.0]),
            (vec![0.0, 1.0], vec![-0.4, 0.7]),
        ];
        for (du, dv) in dirs {
            let r = ctx.cobasis_restriction_residual(&du, &dv);
            assert!(r < 1e-11, "cobasis residual {r:.3e}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn duality_residuals_stay_tiny_on_the_sphere(
            u0 in 0.5f64..2.6,
            u1 in -2.4f64..2.4,
            v0 in 0.25f64..1.5,
            v1 in -1.5f64..-0.25,
        ) {
            let model = MetricModel::euclidean(3, 1.0).unwrap();
            let imm = Immersion::sphere2().unwrap();
            let ctx = SubContext::build(
                &model,
                &imm,
                &SubPoint { u: vec![u0, u1], v: vec![v0, v1] },
            )
            .unwrap();
            for r in ctx.duality_residuals() {
                prop_assert!(r < 1e-10);
            }
        }
    }
}
