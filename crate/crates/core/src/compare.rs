//! Induced versus intrinsic geometry on an immersed submanifold.
//!
//! A submanifold carries two natural geometries: the one induced by
//! restricting the ambient apparatus through the moving frame, and the one it
//! builds on its own account from the pulled-back energy. This module
//! instantiates the ambient engine a second time at dimension `m` on that
//! pulled-back energy (one engine, two dimensions), forms the connection
//! difference `D` and the deformation tensors between the two pipelines, and
//! evaluates the classical closed-form expressions for those differences next
//! to oracle values computed directly from both sides.
//!
//! Every check lands in a [`ComparisonRow`]: asserted rows are identities the
//! library guarantees, informational rows document a closed-form candidate
//! next to its oracle without gating anything (several of the transcribed
//! closed forms carry known defects; the point is to measure them, not to
//! silently repair them).

use crate::ambient::{
    assemble_curvature, assemble_torsion, bracket_from_jets, bundle_jets, delta_deriv, Block3,
    Block4, BundleJets, ConnBlocksAtPoint, JBlock,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::jet::Jet;
use crate::linalg::{jcube, jmat, values2, values3, JMat};
use crate::metric::MetricModel;
use crate::submanifold::{Immersion, SubContext, SubPoint, EMBED_ORDER};

/// Default relative tolerance for asserted equality rows.
pub const TOL_ASSERTED: f64 = 1e-8;
/// Tolerance for definitional identities (pure re-arrangements of one side).
pub const TOL_DEFINITIONAL: f64 = 1e-9;
/// Tolerance for the intrinsic-vs-induced fundamental tensor invariant.
pub const TOL_INTRINSIC_METRIC: f64 = 1e-10;
/// Tolerance for difference-tensor rows checked against bracket oracles.
pub const TOL_DIFFERENCE: f64 = 1e-7;
/// Default tolerance attached to informational dual-path rows.
pub const TOL_INFORMATIONAL: f64 = 1e-6;

/// Stable names of every row [`CompareContext::report`] emits, in order.
pub const ROW_NAMES: &[&str] = &[
    "compare.intrinsic-metric",
    "compare.adapted-basis",
    "compare.brackets.intrinsic",
    "compare.brackets.induced",
    "compare.connection-difference",
    "compare.d100",
    "compare.d101",
    "compare.c01",
    "compare.c11",
    "compare.delta-h00",
    "compare.delta-v10",
    "compare.delta-v10-remainder",
    "compare.deformation-hh-h",
    "compare.deformation-hh-v",
    "compare.deformation-hv-h",
    "compare.deformation-hv-v",
    "torsion.t00-intrinsic",
    "torsion.t00-induced",
    "torsion.s11-intrinsic",
    "torsion.s11-induced",
    "torsion.p10",
    "torsion.r01",
    "torsion.p11",
    "curvature.sh",
    "curvature.sv",
    "curvature.rh",
    "curvature.rv",
    "curvature.ph",
    "curvature.pv",
    "curvature.rh-intrinsic-basis",
    "curvature.rv-intrinsic-basis",
    "curvature.ph-intrinsic-basis",
    "curvature.pv-intrinsic-basis",
];

/// The geometry the submanifold carries on its own account: the ambient
/// energy pulled back through the immersion, packaged as a chart model of
/// dimension `m` with the same lift constant.
pub struct IntrinsicModel {
    model: MetricModel,
}

impl IntrinsicModel {
    /// Pulls the ambient energy back through the immersion:
    /// `F2_sub(u, v) = F2(x(u), dx(u) v)`.
    ///
    /// The resulting model is an ordinary [`MetricModel`], so the whole
    /// ambient apparatus (spray, nonlinear connection, metrical blocks,
    /// torsions, curvatures) applies to it unchanged at dimension `m`.
    pub fn build(ambient: &MetricModel, imm: &Immersion) -> Result<IntrinsicModel> {
        if ambient.dim() != imm.n() {
            return Err(Error::Dimension(format!(
                "ambient dimension {} does not match immersion target {}",
                ambient.dim(),
                imm.n()
            )));
        }
        let energy = ambient.energy().clone();
        let imm = imm.clone();
        let m = imm.m();
        let n = imm.n();
        let field = ScalarField::new(m, m, move |u: &[Jet], v: &[Jet]| {
            // Expand the chart map around the incoming base values; the
            // expansion reads its variables relative to those values, so it
            // composes directly with the caller's jets whatever space they
            // live in.
            let ustar: Vec<f64> = u.iter().map(Jet::value).collect();
            let ex = imm.expand(&ustar, EMBED_ORDER);
            let x: Vec<Jet> = ex.iter().map(|e| e.compose(u)).collect();
            let y: Vec<Jet> = (0..n)
                .map(|a| {
                    let mut acc = &ex[a].deriv(0).compose(u) * &v[0];
                    for al in 1..m {
                        acc = &acc + &(&ex[a].deriv(al).compose(u) * &v[al]);
                    }
                    acc
                })
                .collect();
            energy.eval(&x, &y)
        });
        let label = format!("intrinsic({})", ambient.label());
        let model = MetricModel::custom(m, ambient.p(), &label, field)?;
        Ok(IntrinsicModel { model })
    }

    /// The wrapped chart model of dimension `m`.
    pub fn model(&self) -> &MetricModel {
        &self.model
    }
}

/// One residual check: a named identity with both sides condensed to their
/// largest entries and the relative residual that decides the verdict.
#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub name: &'static str,
    pub lhs_magnitude: f64,
    pub rhs_magnitude: f64,
    pub abs_residual: f64,
    /// `abs_residual / (1 + max(|lhs|, |rhs|))`.
    pub rel_residual: f64,
    pub tolerance: f64,
    /// Informational rows document a closed-form candidate next to its
    /// oracle and never gate a run.
    pub informational: bool,
    /// `rel_residual <= tolerance`.
    pub pass: bool,
}

/// Ordered collection of comparison rows for one evaluation point.
#[derive(Clone, Debug, Default)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// Looks a row up by its stable name.
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Whether every asserted (non-informational) row passes.
    pub fn asserted_pass(&self) -> bool {
        self.rows.iter().all(|r| r.informational || r.pass)
    }

    /// Largest relative residual over the asserted rows.
    pub fn max_asserted_residual(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| !r.informational)
            .map(|r| r.rel_residual)
            .fold(0.0, f64::max)
    }
}

fn amax(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `(lhs max-abs, rhs max-abs, abs residual, relative residual)` of two
/// flattened sides; the relative residual normalizes by `1 + max magnitude`
/// so identities between small blocks are not graded on noise.
pub(crate) fn residual_stats(lhs: &[f64], rhs: &[f64]) -> (f64, f64, f64, f64) {
    assert_eq!(lhs.len(), rhs.len(), "row sides must align");
    let lhs_magnitude = amax(lhs);
    let rhs_magnitude = amax(rhs);
    let abs_residual = lhs
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let rel_residual = abs_residual / (1.0 + lhs_magnitude.max(rhs_magnitude));
    (lhs_magnitude, rhs_magnitude, abs_residual, rel_residual)
}

fn make_row(
    name: &'static str,
    lhs: &[f64],
    rhs: &[f64],
    tolerance: f64,
    informational: bool,
) -> ComparisonRow {
    let (lhs_magnitude, rhs_magnitude, abs_residual, rel_residual) = residual_stats(lhs, rhs);
    ComparisonRow {
        name,
        lhs_magnitude,
        rhs_magnitude,
        abs_residual,
        rel_residual,
        tolerance,
        informational,
        pass: rel_residual <= tolerance,
    }
}

fn flat2(t: &[Vec<f64>]) -> Vec<f64> {
    t.iter().flatten().copied().collect()
}

fn flat3(t: &Block3) -> Vec<f64> {
    t.iter().flatten().flatten().copied().collect()
}

fn flat4(t: &Block4) -> Vec<f64> {
    t.iter().flatten().flatten().flatten().copied().collect()
}

fn zeros3(m: usize) -> Block3 {
    vec![vec![vec![0.0; m]; m]; m]
}

/// Deterministic scalar fields on `(u, v)` with nontrivial mixed second
/// derivatives in every slot; shared by the commutator and adapted-basis
/// checks so their verdicts are reproducible.
fn probe_fields(m: usize) -> Vec<Box<dyn Fn(&[Jet], &[Jet]) -> Jet>> {
    let last = m - 1;
    let mut out: Vec<Box<dyn Fn(&[Jet], &[Jet]) -> Jet>> = Vec::new();
    out.push(Box::new(move |u, v| {
        let mut acc = &u[0] * &v[0];
        for al in 1..m {
            acc = &acc + &(&u[al] * &v[al]).scale(0.4 + 0.3 * al as f64);
        }
        acc
    }));
    out.push(Box::new(move |u, v| {
        &(&u[0].sin() * &v[last]) + &(&u[last].cos() * &v[0])
    }));
    out.push(Box::new(move |u, v| {
        &(&u[last].scale(0.2).exp() * &(&v[0] * &v[0]).scale(0.5)) + &(&u[0] * &u[0])
    }));
    out.push(Box::new(move |u, v| {
        let mut sq = &v[0] * &v[0];
        for al in 1..m {
            sq = &sq + &(&v[al] * &v[al]);
        }
        &(&sq * &u[0].sin().scale(0.1)) + &v[last]
    }));
    out.push(Box::new(move |u, v| {
        &(&(&u[0] * &u[last]) * &v[0]) + &(&v[last] * &v[0]).scale(0.7)
    }));
    out
}

/// Closed forms for the difference between the two delta-delta bracket
/// blocks and the two fiber bracket blocks, next to their oracles.
pub struct BracketDifferenceTensors {
    /// Literal closed form for the delta-delta bracket difference, layout
    /// `[al][be][ga]`, oriented like the torsion `r01` block.
    pub d100: Block3,
    /// Literal fiber derivative of the connection difference,
    /// `pd D^al_be / pd v^ga`.
    pub d101: Block3,
    /// Oracle: intrinsic minus induced `r01` bracket block.
    pub r01_difference: Block3,
    /// Oracle: intrinsic minus induced fiber bracket block.
    pub b_difference: Block3,
}

/// The three-index deformation tensors between the intrinsic and the induced
/// tangent connection, each as a literal closed form next to its oracle.
pub struct DeformationDeltas {
    /// Literal closed form for the horizontal L-block difference.
    pub h00_literal: Block3,
    /// Oracle: intrinsic minus induced-tangent L00 values.
    pub h00_oracle: Block3,
    /// Literal closed form for the vertical L-block difference.
    pub v10_literal: Block3,
    /// Oracle: intrinsic minus induced-tangent L10 values.
    pub v10_oracle: Block3,
    /// Literal remainder term of the vertical closed form (the part left
    /// after its two metric-gradient brackets).
    pub remainder_literal: Block3,
    /// Oracle remainder: the v10 oracle minus the two literal brackets.
    pub remainder_oracle: Block3,
}

/// Components of the deformation tensor of the pair (intrinsic connection,
/// induced tangent connection), expressed in the intrinsic adapted basis.
///
/// Block naming: the first two letters give the argument pair (`hh` for two
/// horizontal arguments, `hv` for horizontal-vertical), the suffix the output
/// family.
pub struct DeformationComponents {
    pub hh_horizontal_literal: Block3,
    pub hh_horizontal_oracle: Block3,
    pub hh_vertical_literal: Block3,
    pub hh_vertical_oracle: Block3,
    /// Structurally zero: neither connection carries a vertical argument
    /// into the horizontal frame, so this block has no source terms at all.
    pub hv_horizontal: Block3,
    pub hv_vertical_literal: Block3,
    pub hv_vertical_oracle: Block3,
}

/// Everything needed to compare induced and intrinsic geometry at one
/// parameter-bundle point. Built over a [`SubContext`] so both pipelines
/// share one jet space, one frame and one evaluation point.
pub struct CompareContext {
    pub sub: SubContext,
    pub intrinsic: IntrinsicModel,
    /// Intrinsic pipeline on `(u, v)`: metric pair, spray, nonlinear
    /// connection and metrical blocks of the pulled-back energy.
    pub intr: BundleJets,
    /// Connection difference `D^al_be = N_intr^al_be - N_ind^al_be` as jets.
    pub d_field: JMat,
    /// Oracle deformation field: intrinsic minus induced-tangent L00 jets.
    pub dh00_jets: JBlock,
    /// Oracle deformation field: intrinsic minus induced-tangent L10 jets.
    pub dv10_jets: JBlock,
}

impl CompareContext {
    /// Builds both pipelines at one parameter-bundle point.
    pub fn build(model: &MetricModel, imm: &Immersion, pt: &SubPoint) -> Result<CompareContext> {
        let sub = SubContext::build(model, imm, pt)?;
        let intrinsic = IntrinsicModel::build(model, imm)?;
        let intr = bundle_jets(
            intrinsic.model().energy(),
            model.p(),
            &sub.u_jets,
            &sub.v_jets,
            sub.cv_sub.clone(),
        )?;
        let m = sub.m;
        let d_field = jmat(m, m, |al, be| &intr.n_conn[al][be] - &sub.n_sub[al][be]);
        let dh00_jets = jcube(m, m, m, |al, be, ga| {
            &intr.conn.l00[al][be][ga] - &sub.tangent.l00[al][be][ga]
        });
        let dv10_jets = jcube(m, m, m, |al, be, ga| {
            &intr.conn.l10[al][be][ga] - &sub.tangent.l10[al][be][ga]
        });
        Ok(CompareContext { sub, intrinsic, intr, d_field, dh00_jets, dv10_jets })
    }

    /// Adapted base derivative with respect to the induced connection.
    fn delta_induced(&self, j: &Jet, al: usize) -> Jet {
        delta_deriv(j, al, &self.sub.cv_sub, &self.sub.n_sub)
    }

    /// Adapted base derivative with respect to the intrinsic connection.
    fn delta_intrinsic(&self, j: &Jet, al: usize) -> Jet {
        delta_deriv(j, al, &self.sub.cv_sub, &self.intr.n_conn)
    }

    /// Fiber derivative along `v^al`.
    fn vdot(&self, j: &Jet, al: usize) -> Jet {
        j.deriv(self.sub.cv_sub.y[al])
    }

    /// Intrinsic nonlinear connection values, `m x m`.
    pub fn intrinsic_nonlinear_connection(&self) -> Vec<Vec<f64>> {
        values2(&self.intr.n_conn)
    }

    /// Intrinsic metrical connection blocks at the point.
    pub fn intrinsic_metrical_connection(&self) -> ConnBlocksAtPoint {
        self.intr.conn.values()
    }

    /// Bracket coefficient blocks of a nonlinear connection field on
    /// `(u, v)`: the delta-delta coefficients (layout `[si][al][be]`,
    /// `delta_al N^si_be - delta_be N^si_al`) and the fiber derivatives
    /// `pd N^si_al / pd v^be`.
    pub fn submanifold_brackets(&self, n_conn: &JMat) -> (Block3, Block3) {
        bracket_from_jets(n_conn, &self.sub.cv_sub)
    }

    /// Both sides of the bracket identities applied to the probe fields:
    /// commutator values on the left, bracket-block contractions on the
    /// right. Used to verify the coefficient arrays independently.
    fn commutator_sides(&self, n_conn: &JMat) -> (Vec<f64>, Vec<f64>) {
        let cv = &self.sub.cv_sub;
        let m = self.sub.m;
        let (r_spec, b_brk) = bracket_from_jets(n_conn, cv);
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for f in probe_fields(m) {
            let fj = f(&self.sub.u_jets, &self.sub.v_jets);
            let deltas: Vec<Jet> = (0..m).map(|al| delta_deriv(&fj, al, cv, n_conn)).collect();
            let fiber_vals: Vec<f64> = (0..m).map(|si| fj.deriv(cv.y[si]).value()).collect();
            for al in 0..m {
                for be in 0..m {
                    if al < be {
                        // [delta_al, delta_be] f = -R^si_{al be} pd_si f.
                        let comm = delta_deriv(&deltas[be], al, cv, n_conn).value()
                            - delta_deriv(&deltas[al], be, cv, n_conn).value();
                        let mut contraction = 0.0;
                        for si in 0..m {
                            contraction -= r_spec[si][al][be] * fiber_vals[si];
                        }
                        lhs.push(comm);
                        rhs.push(contraction);
                    }
                    // [delta_al, pd_be] f = B^si_{al be} pd_si f.
                    let comm = delta_deriv(&fj.deriv(cv.y[be]), al, cv, n_conn).value()
                        - deltas[al].deriv(cv.y[be]).value();
                    let mut contraction = 0.0;
                    for si in 0..m {
                        contraction += b_brk[si][al][be] * fiber_vals[si];
                    }
                    lhs.push(comm);
                    rhs.push(contraction);
                }
            }
        }
        (lhs, rhs)
    }

    /// Max absolute mismatch between the bracket blocks of `n_conn` and the
    /// commutators of its adapted vector fields on the probe fields.
    pub fn bracket_commutator_residual(&self, n_conn: &JMat) -> f64 {
        let (lhs, rhs) = self.commutator_sides(n_conn);
        lhs.iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// The connection difference `D` as values; exact by construction.
    pub fn connection_difference(&self) -> Vec<Vec<f64>> {
        values2(&self.d_field)
    }

    /// Mixed tangential-normal metric block and its raised form, as jets.
    /// The frame is metric-orthogonal by construction, so both vanish
    /// identically; the literal closed form for `D` routes through them.
    fn mixed_metric(&self) -> (JMat, JMat) {
        let s = &self.sub;
        let (m, n) = (s.m, s.n);
        let nm = n - m;
        let zero = Jet::constant(&s.space, 0.0);
        let mix_low = jmat(nm, m, |ab, ga| {
            let mut acc = zero.clone();
            for a in 0..n {
                for bb in 0..n {
                    acc = &acc + &(&(&s.bbar[a][ab] * &s.g[a][bb]) * &s.b[bb][ga]);
                }
            }
            acc
        });
        let mix_up = jmat(nm, m, |ab, al| {
            let mut acc = &s.g_t_inv[al][0] * &mix_low[ab][0];
            for ga in 1..m {
                acc = &acc + &(&s.g_t_inv[al][ga] * &mix_low[ab][ga]);
            }
            acc
        });
        (mix_low, mix_up)
    }

    /// Literal transcription of the closed-form candidate for `D`: the
    /// normal fiber-velocity coefficients contracted through the mixed
    /// tangential-normal metric block (no sum over the free lower index).
    /// The mixed block vanishes for a metric-orthogonal frame, so this
    /// documents the defect of the closed form rather than reproducing `D`.
    pub fn connection_difference_literal(&self) -> Vec<Vec<f64>> {
        let s = &self.sub;
        let m = s.m;
        let nm = s.n - m;
        let (_, mix_up) = self.mixed_metric();
        let k_vals = values2(&s.k);
        let mut out = vec![vec![0.0; m]; m];
        for al in 0..m {
            for be in 0..m {
                let mut acc = 0.0;
                for ab in 0..nm {
                    acc += mix_up[ab][al].value() * k_vals[ab][be] * s.point.v[be];
                }
                out[al][be] = acc;
            }
        }
        out
    }

    /// Both sides of the adapted-basis relation on the probe fields: the
    /// intrinsic delta derivative on the left, the induced delta corrected
    /// by `D` on the right.
    fn adapted_basis_sides(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.sub.m;
        let d_vals = values2(&self.d_field);
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for f in probe_fields(m) {
            let fj = f(&self.sub.u_jets, &self.sub.v_jets);
            for al in 0..m {
                lhs.push(self.delta_intrinsic(&fj, al).value());
                let mut r = self.delta_induced(&fj, al).value();
                for be in 0..m {
                    r -= d_vals[be][al] * self.vdot(&fj, be).value();
                }
                rhs.push(r);
            }
        }
        (lhs, rhs)
    }

    /// Max residual of the adapted-basis relation over the probe fields.
    pub fn adapted_basis_residual(&self) -> f64 {
        let (lhs, rhs) = self.adapted_basis_sides();
        lhs.iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Closed forms for the bracket-block differences next to the oracles
    /// computed from both connections directly.
    pub fn bracket_difference_tensors(&self) -> BracketDifferenceTensors {
        let m = self.sub.m;
        let cv = &self.sub.cv_sub;
        let d_vals = values2(&self.d_field);
        let (r_ind, b_ind) = bracket_from_jets(&self.sub.n_sub, cv);
        let (r_int, b_int) = bracket_from_jets(&self.intr.n_conn, cv);

        let mut d100 = zeros3(m);
        let mut d101 = zeros3(m);
        let mut r01_difference = zeros3(m);
        let mut b_difference = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for ga in 0..m {
                    let mut v = self.delta_induced(&self.d_field[al][be], ga).value()
                        - self.delta_induced(&self.d_field[al][ga], be).value();
                    for ep in 0..m {
                        v += d_vals[ep][be] * self.intr.n_conn[al][ga].deriv(cv.y[ep]).value()
                            - d_vals[ep][ga] * self.intr.n_conn[al][be].deriv(cv.y[ep]).value();
                    }
                    d100[al][be][ga] = v;
                    d101[al][be][ga] = self.d_field[al][be].deriv(cv.y[ga]).value();
                    // The closed form is oriented like the torsion block, the
                    // opposite of the raw delta-delta coefficient.
                    r01_difference[al][be][ga] = -(r_int[al][be][ga] - r_ind[al][be][ga]);
                    b_difference[al][be][ga] = b_int[al][be][ga] - b_ind[al][be][ga];
                }
            }
        }
        BracketDifferenceTensors { d100, d101, r01_difference, b_difference }
    }

    /// The three-index deformation tensors, literal closed forms next to
    /// oracle differences.
    pub fn deformation_deltas(&self) -> DeformationDeltas {
        let s = &self.sub;
        let m = s.m;
        let n = s.n;
        let nm = n - m;
        let cv = &s.cv_sub;
        let p = self.intr.p;

        let gt = values2(&s.g_t);
        let gt_inv = values2(&s.g_t_inv);
        let d_vals = values2(&self.d_field);
        let k_vals = values2(&s.k);
        let bbar_vals = values2(&s.bbar);
        let h00_oracle = values3(&self.dh00_jets);
        let v10_oracle = values3(&self.dv10_jets);

        // Fiber gradient of the induced metric, `pd g_{be de} / pd v^ep`.
        let mut dgt_dv = zeros3(m);
        for be in 0..m {
            for de in 0..m {
                for ep in 0..m {
                    dgt_dv[be][de][ep] = s.g_t[be][de].deriv(cv.y[ep]).value();
                }
            }
        }

        // Horizontal block: the mixed-metric bracket (vanishing for this
        // frame) plus the metric-gradient bracket in the raised difference.
        let (mix_low, mix_up) = self.mixed_metric();
        let mut kup = vec![vec![0.0; m]; nm];
        for ab in 0..nm {
            for al in 0..m {
                let mut acc = 0.0;
                for ga in 0..m {
                    acc += k_vals[ab][ga] * gt_inv[ga][al];
                }
                kup[ab][al] = acc;
            }
        }
        let mut h00_literal = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for de in 0..m {
                    let mut br1 = 0.0;
                    for ab in 0..nm {
                        br1 += 0.5
                            * (mix_up[ab][al].deriv(cv.y[de]).value() * k_vals[ab][be]
                                - mix_low[ab][be].deriv(cv.y[de]).value() * kup[ab][al]);
                    }
                    let mut br2 = 0.0;
                    for si in 0..m {
                        let mut inner = 0.0;
                        for ep in 0..m {
                            inner += d_vals[ep][be] * dgt_dv[si][de][ep]
                                + d_vals[ep][de] * dgt_dv[si][be][ep]
                                - d_vals[ep][si] * dgt_dv[be][de][ep];
                        }
                        br2 -= 0.5 * gt_inv[al][si] * inner;
                    }
                    h00_literal[al][be][de] = br1 + br2;
                }
            }
        }

        // Vertical block: two scalar-lift-weight brackets plus a remainder.
        // The weight is read as the scalar `p^2 / |v|^2`; its ambient fiber
        // gradient is taken through the probe slots before restriction.
        let h_scalar = s.bundle.norm_sq.recip().scale(p * p);
        let mut dh_amb = vec![0.0; n];
        for bb in 0..n {
            dh_amb[bb] = s.restrict(&h_scalar.deriv(s.cv_amb.y[bb])).value();
        }
        let inv2h = s.norm_sq.value() / (2.0 * p * p);
        let mut a_contr = vec![0.0; m];
        for si in 0..m {
            let mut acc = 0.0;
            for ab in 0..nm {
                for bb in 0..n {
                    acc += bbar_vals[bb][ab] * k_vals[ab][si] * dh_amb[bb];
                }
            }
            a_contr[si] = acc;
        }
        let mut brackets = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for de in 0..m {
                    let mut br_a = 0.0;
                    let mut br_b = 0.0;
                    for si in 0..m {
                        br_a -= inv2h
                            * gt_inv[al][si]
                            * (a_contr[si] * gt[be][de] - a_contr[be] * gt[si][de]);
                        let mut inner = 0.0;
                        for ep in 0..m {
                            inner += d_vals[ep][si] * dgt_dv[be][de][ep]
                                - d_vals[ep][be] * dgt_dv[si][de][ep]
                                - d_vals[ep][de] * dgt_dv[be][si][ep];
                        }
                        br_b += inv2h * gt_inv[al][si] * inner;
                    }
                    brackets[al][be][de] = br_a + br_b;
                }
            }
        }

        let remainder_literal = self.vertical_remainder(&dgt_dv);
        let mut v10_literal = zeros3(m);
        let mut remainder_oracle = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for de in 0..m {
                    v10_literal[al][be][de] =
                        brackets[al][be][de] + remainder_literal[al][be][de];
                    remainder_oracle[al][be][de] =
                        v10_oracle[al][be][de] - brackets[al][be][de];
                }
            }
        }

        DeformationDeltas {
            h00_literal,
            h00_oracle,
            v10_literal,
            v10_oracle,
            remainder_literal,
            remainder_oracle,
        }
    }

    /// The eight-term remainder of the vertical deformation closed form.
    fn vertical_remainder(&self, dgt_dv: &Block3) -> Block3 {
        let s = &self.sub;
        let m = s.m;
        let n = s.n;
        let nm = n - m;
        let cv = &s.cv_sub;

        let gt = values2(&s.g_t);
        let gt_inv = values2(&s.g_t_inv);
        let g_vals = values2(&s.g);
        let g_inv_vals = values2(&s.g_inv);
        let b_vals = values2(&s.b);
        let bbar_vals = values2(&s.bbar);
        let bdual_vals = values2(&s.bdual);
        let k_vals = values2(&s.k);
        let d_vals = values2(&self.d_field);

        // Fiber velocity of the lift, `B0 + N B`, values.
        let mut w_vals = vec![vec![0.0; m]; n];
        let n_amb_vals = values2(&s.n_amb);
        for a in 0..n {
            for ga in 0..m {
                let mut acc = 0.0;
                for al in 0..m {
                    acc += s.b2[a][al][ga].value() * s.point.v[al];
                }
                for c in 0..n {
                    acc += n_amb_vals[a][c] * b_vals[c][ga];
                }
                w_vals[a][ga] = acc;
            }
        }
        // Fiber gradient of the tangent dual rows.
        let mut bdual_dv = vec![vec![vec![0.0; m]; n]; m];
        for al in 0..m {
            for a in 0..n {
                for be in 0..m {
                    bdual_dv[al][a][be] = s.bdual[al][a].deriv(cv.y[be]).value();
                }
            }
        }
        // Ambient fiber gradient of the ambient metric, restricted.
        let mut dgdy = vec![vec![vec![0.0; n]; n]; n];
        for bb in 0..n {
            for f in 0..n {
                for d in 0..n {
                    dgdy[bb][f][d] =
                        s.restrict(&s.bundle.g[bb][f].deriv(s.cv_amb.y[d])).value();
                }
            }
        }
        let mut b2_vals = vec![vec![vec![0.0; m]; m]; n];
        for a in 0..n {
            for al in 0..m {
                for be in 0..m {
                    b2_vals[a][al][be] = s.b2[a][al][be].value();
                }
            }
        }
        let mut d101 = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for ga in 0..m {
                    d101[al][be][ga] = self.d_field[al][be].deriv(cv.y[ga]).value();
                }
            }
        }

        let mut out = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for ga in 0..m {
                    let mut t = 0.0;
                    for a in 0..n {
                        t += 0.5 * bdual_dv[al][a][be] * w_vals[a][ga];
                        t -= 0.5 * bdual_vals[al][a] * b2_vals[a][be][ga];
                    }
                    for a in 0..n {
                        for f in 0..n {
                            for bb in 0..n {
                                for d in 0..n {
                                    for ab in 0..nm {
                                        t -= 0.5
                                            * g_inv_vals[a][f]
                                            * bdual_vals[al][a]
                                            * b_vals[bb][be]
                                            * bbar_vals[d][ab]
                                            * dgdy[bb][f][d]
                                            * k_vals[ab][ga];
                                    }
                                }
                            }
                        }
                    }
                    for de in 0..m {
                        for si in 0..m {
                            for a in 0..n {
                                t -= 0.5
                                    * gt_inv[al][de]
                                    * bdual_vals[si][a]
                                    * b2_vals[a][ga][de]
                                    * gt[si][be];
                                t -= 0.5
                                    * gt_inv[al][de]
                                    * gt[si][be]
                                    * bdual_dv[si][a][ga]
                                    * w_vals[a][de];
                            }
                        }
                        for bb in 0..n {
                            for d in 0..n {
                                t += gt_inv[al][de]
                                    * g_vals[bb][d]
                                    * b_vals[bb][be]
                                    * b2_vals[d][de][ga];
                            }
                        }
                        let mut inner = 0.0;
                        for ep in 0..m {
                            inner += d_vals[ep][ga] * dgt_dv[be][de][ep];
                        }
                        for si in 0..m {
                            inner += d101[si][ga][de] * gt[si][be];
                        }
                        t -= 0.5 * gt_inv[al][de] * inner;
                    }
                    t += 0.5 * d101[al][ga][be];
                    out[al][be][ga] = t;
                }
            }
        }
        out
    }

    /// Components of the deformation tensor of the connection pair,
    /// literal transcriptions next to structurally derived oracles.
    pub fn deformation_tensor_components(&self) -> DeformationComponents {
        let m = self.sub.m;
        let deltas = self.deformation_deltas();
        let d_vals = values2(&self.d_field);
        let tang = self.sub.tangent.values();
        let cv = &self.sub.cv_sub;

        let mut d101 = zeros3(m);
        let mut delta_d = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for ga in 0..m {
                    d101[al][be][ga] = self.d_field[al][be].deriv(cv.y[ga]).value();
                    delta_d[al][be][ga] =
                        self.delta_induced(&self.d_field[al][be], ga).value();
                }
            }
        }

        let hh_h = |h00: &Block3| -> Block3 {
            let mut out = zeros3(m);
            for al in 0..m {
                for be in 0..m {
                    for ga in 0..m {
                        let mut v = h00[al][be][ga];
                        for ph in 0..m {
                            v += d_vals[ph][ga] * tang.c01[al][be][ph];
                        }
                        out[al][be][ga] = v;
                    }
                }
            }
            out
        };
        let hh_horizontal_literal = hh_h(&deltas.h00_literal);
        let hh_horizontal_oracle = hh_h(&deltas.h00_oracle);

        let hh_v = |hh_h_blk: &Block3, h00: &Block3| -> Block3 {
            let mut out = zeros3(m);
            for al in 0..m {
                for be in 0..m {
                    for ga in 0..m {
                        let mut v = delta_d[al][be][ga];
                        for ep in 0..m {
                            v += d_vals[al][ep] * hh_h_blk[ep][be][ga];
                            v += d_vals[ep][be] * tang.l10[al][ep][ga];
                            let mut inner = d101[al][be][ep];
                            for ph in 0..m {
                                inner += d_vals[ph][be] * tang.c11[al][ph][ep];
                            }
                            v -= d_vals[ep][ga] * inner;
                            v -= d_vals[al][ep] * (tang.l00[ep][be][ga] + h00[ep][be][ga]);
                        }
                        out[al][be][ga] = v;
                    }
                }
            }
            out
        };
        let hh_vertical_literal = hh_v(&hh_horizontal_literal, &deltas.h00_literal);
        let hh_vertical_oracle = hh_v(&hh_horizontal_oracle, &deltas.h00_oracle);

        // Mixed pair, vertical output: the literal correction rides the
        // horizontal C-block, the structural derivation the vertical one.
        let mut hv_vertical_literal = zeros3(m);
        let mut hv_vertical_oracle = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for ga in 0..m {
                    let mut lit = deltas.v10_literal[al][be][ga];
                    let mut orc = deltas.v10_oracle[al][be][ga];
                    for ep in 0..m {
                        lit += d_vals[ep][ga] * tang.c01[al][be][ep];
                        orc += d_vals[ep][ga] * tang.c11[al][be][ep];
                    }
                    hv_vertical_literal[al][be][ga] = lit;
                    hv_vertical_oracle[al][be][ga] = orc;
                }
            }
        }

        DeformationComponents {
            hh_horizontal_literal,
            hh_horizontal_oracle,
            hh_vertical_literal,
            hh_vertical_oracle,
            hv_horizontal: zeros3(m),
            hv_vertical_literal,
            hv_vertical_oracle,
        }
    }

    /// Torsion-block rows: intrinsic zeros, block equalities, and the two
    /// torsion relations driven by the bracket-difference tensors.
    pub fn torsion_comparison(&self) -> Vec<ComparisonRow> {
        let m = self.sub.m;
        let cv = &self.sub.cv_sub;
        let t_int = assemble_torsion(&self.intr.conn, &self.intr.n_conn, cv);
        let t_ind = assemble_torsion(&self.sub.tangent, &self.sub.n_sub, cv);
        let bd = self.bracket_difference_tensors();
        let v10_oracle = values3(&self.dv10_jets);
        let zero = zeros3(m);

        let mut r01_rhs = zeros3(m);
        let mut p11_rhs = zeros3(m);
        for al in 0..m {
            for be in 0..m {
                for ga in 0..m {
                    r01_rhs[al][be][ga] = t_ind.r01[al][be][ga] + bd.d100[al][be][ga];
                    p11_rhs[al][be][ga] = t_ind.p11[al][be][ga] + bd.d101[al][be][ga]
                        - v10_oracle[al][ga][be];
                }
            }
        }

        vec![
            make_row(
                "torsion.t00-intrinsic",
                &flat3(&t_int.t00),
                &flat3(&zero),
                TOL_ASSERTED,
                false,
            ),
            make_row(
                "torsion.t00-induced",
                &flat3(&t_ind.t00),
                &flat3(&zero),
                TOL_INFORMATIONAL,
                true,
            ),
            make_row(
                "torsion.s11-intrinsic",
                &flat3(&t_int.s11),
                &flat3(&zero),
                TOL_ASSERTED,
                false,
            ),
            make_row(
                "torsion.s11-induced",
                &flat3(&t_ind.s11),
                &flat3(&zero),
                TOL_INFORMATIONAL,
                true,
            ),
            make_row(
                "torsion.p10",
                &flat3(&t_int.p10),
                &flat3(&t_ind.p10),
                TOL_ASSERTED,
                false,
            ),
            make_row(
                "torsion.r01",
                &flat3(&t_int.r01),
                &flat3(&r01_rhs),
                TOL_DIFFERENCE,
                false,
            ),
            make_row(
                "torsion.p11",
                &flat3(&t_int.p11),
                &flat3(&p11_rhs),
                TOL_ASSERTED,
                false,
            ),
        ]
    }

    /// Curvature-block rows: S-family equalities (asserted) and the four
    /// R/P-family difference displays next to their oracle differences, with
    /// the induced curvature additionally evaluated in the intrinsic adapted
    /// basis under separate row names.
    pub fn curvature_comparison(&self) -> Vec<ComparisonRow> {
        let cv = &self.sub.cv_sub;
        let c_int = assemble_curvature(&self.intr.conn, &self.intr.n_conn, cv);
        let c_ind = assemble_curvature(&self.sub.tangent, &self.sub.n_sub, cv);
        let c_ind_ib = assemble_curvature(&self.sub.tangent, &self.intr.n_conn, cv);
        let bd = self.bracket_difference_tensors();

        let m = self.sub.m;
        let diff4 = |a: &Block4, b: &Block4| -> Block4 {
            let mut out = vec![vec![vec![vec![0.0; m]; m]; m]; m];
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            out[i][j][k][l] = a[i][j][k][l] - b[i][j][k][l];
                        }
                    }
                }
            }
            out
        };

        let rh_lit = self.delta_rh_literal(&bd.d100);
        let rv_lit = self.delta_rv_literal();
        let ph_lit = self.delta_ph_literal(&bd.d101);
        let pv_lit = self.delta_pv_literal();

        let mut rows = vec![
            make_row(
                "curvature.sh",
                &flat4(&c_int.sh),
                &flat4(&c_ind.sh),
                TOL_ASSERTED,
                false,
            ),
            make_row(
                "curvature.sv",
                &flat4(&c_int.sv),
                &flat4(&c_ind.sv),
                TOL_ASSERTED,
                false,
            ),
        ];
        let names: [&'static str; 4] =
            ["curvature.rh", "curvature.rv", "curvature.ph", "curvature.pv"];
        let lits = [&rh_lit, &rv_lit, &ph_lit, &pv_lit];
        let cint = [&c_int.rh, &c_int.rv, &c_int.ph, &c_int.pv];
        let cind = [&c_ind.rh, &c_ind.rv, &c_ind.ph, &c_ind.pv];
        for i in 0..4 {
            rows.push(make_row(
                names[i],
                &flat4(lits[i]),
                &flat4(&diff4(cint[i], cind[i])),
                TOL_INFORMATIONAL,
                true,
            ));
        }
        let names_ib: [&'static str; 4] = [
            "curvature.rh-intrinsic-basis",
            "curvature.rv-intrinsic-basis",
            "curvature.ph-intrinsic-basis",
            "curvature.pv-intrinsic-basis",
        ];
        let cind_ib = [&c_ind_ib.rh, &c_ind_ib.rv, &c_ind_ib.ph, &c_ind_ib.pv];
        for i in 0..4 {
            rows.push(make_row(
                names_ib[i],
                &flat4(lits[i]),
                &flat4(&diff4(cint[i], cind_ib[i])),
                TOL_INFORMATIONAL,
                true,
            ));
        }
        rows
    }

    /// Literal closed form for the horizontal R-family curvature difference,
    /// layout `[be][al][ga][de]`.
    fn delta_rh_literal(&self, d100: &Block3) -> Block4 {
        let m = self.sub.m;
        let l00j = &self.sub.tangent.l00;
        let l00 = values3(l00j);
        let dh00 = values3(&self.dh00_jets);
        let c01 = values3(&self.sub.tangent.c01);
        let d_vals = values2(&self.d_field);
        let mut out = vec![vec![vec![vec![0.0; m]; m]; m]; m];
        for be in 0..m {
            for al in 0..m {
                for ga in 0..m {
                    for de in 0..m {
                        let mut v = self.delta_induced(&self.dh00_jets[al][be][ga], de).value()
                            - self.delta_induced(&self.dh00_jets[al][be][de], ga).value();
                        for ep in 0..m {
                            v -= d_vals[ep][de]
                                * (self.vdot(&l00j[al][be][ga], ep).value()
                                    + self.vdot(&self.dh00_jets[al][be][ga], ep).value());
                            v += d_vals[ep][ga]
                                * (self.vdot(&l00j[al][be][de], ep).value()
                                    + self.vdot(&self.dh00_jets[al][be][de], ep).value());
                        }
                        for si in 0..m {
                            v += l00[si][be][ga] * dh00[al][si][de]
                                + dh00[si][be][ga] * l00[al][si][de]
                                - l00[si][be][de] * dh00[al][si][ga]
                                - dh00[si][be][de] * l00[al][si][ga];
                            v += c01[al][be][si] * d100[si][ga][de];
                        }
                        out[be][al][ga][de] = v;
                    }
                }
            }
        }
        out
    }

    /// Literal closed form for the vertical R-family curvature difference.
    fn delta_rv_literal(&self) -> Block4 {
        let m = self.sub.m;
        let l10j = &self.sub.tangent.l10;
        let l10 = values3(l10j);
        let dv10 = values3(&self.dv10_jets);
        let c11 = values3(&self.sub.tangent.c11);
        let d_vals = values2(&self.d_field);
        let mut out = vec![vec![vec![vec![0.0; m]; m]; m]; m];
        for be in 0..m {
            for al in 0..m {
                for ga in 0..m {
                    for de in 0..m {
                        let mut v = 0.5
                            * (self.delta_induced(&self.dv10_jets[al][be][ga], de).value()
                                - self.delta_induced(&self.dv10_jets[al][be][de], ga).value());
                        for ep in 0..m {
                            v += d_vals[ep][ga] * self.vdot(&l10j[al][be][de], ep).value()
                                - d_vals[ep][de] * self.vdot(&l10j[al][be][ga], ep).value();
                            v += 0.5
                                * (d_vals[ep][ga]
                                    * self.vdot(&self.dv10_jets[al][be][de], ep).value()
                                    - d_vals[ep][de]
                                        * self.vdot(&self.dv10_jets[al][be][ga], ep).value());
                            v += 0.5
                                * (l10[ep][be][ga] * dv10[al][ep][de]
                                    - l10[ep][be][de] * dv10[al][ep][ga]
                                    + dv10[ep][be][ga] * l10[al][ep][de]
                                    - dv10[ep][be][de] * l10[al][ep][ga]);
                            v += 0.25
                                * (dv10[al][ep][de] * dv10[ep][be][ga]
                                    - dv10[al][ep][ga] * dv10[ep][be][de]);
                            v += c11[al][be][ep] * dv10[ep][ga][de];
                        }
                        out[be][al][ga][de] = v;
                    }
                }
            }
        }
        out
    }

    /// Literal closed form for the horizontal P-family curvature difference.
    fn delta_ph_literal(&self, d101: &Block3) -> Block4 {
        let m = self.sub.m;
        let dh00 = values3(&self.dh00_jets);
        let c01j = &self.sub.tangent.c01;
        let c01 = values3(c01j);
        let d_vals = values2(&self.d_field);
        let mut out = vec![vec![vec![vec![0.0; m]; m]; m]; m];
        for be in 0..m {
            for al in 0..m {
                for ga in 0..m {
                    for de in 0..m {
                        let mut v = self.vdot(&self.dh00_jets[al][be][ga], de).value();
                        for ep in 0..m {
                            v -= dh00[al][ep][ga] * c01[ep][be][de];
                            v += dh00[ep][be][ga] * c01[al][ep][de];
                            v += c01[al][be][ep] * d101[ep][ga][de];
                        }
                        for si in 0..m {
                            v += d_vals[si][ga] * self.vdot(&c01j[al][be][de], si).value();
                        }
                        out[be][al][ga][de] = v;
                    }
                }
            }
        }
        out
    }

    /// Literal closed form for the vertical P-family curvature difference.
    fn delta_pv_literal(&self) -> Block4 {
        let m = self.sub.m;
        let dv10 = values3(&self.dv10_jets);
        let c11 = values3(&self.sub.tangent.c11);
        let mut out = vec![vec![vec![vec![0.0; m]; m]; m]; m];
        for be in 0..m {
            for al in 0..m {
                for ga in 0..m {
                    for de in 0..m {
                        let mut v = 0.5 * self.vdot(&self.dv10_jets[al][be][ga], de).value();
                        for ep in 0..m {
                            v -= 0.5
                                * (dv10[al][ep][ga] * c11[ep][be][de]
                                    - c11[al][ep][de] * dv10[ep][be][ga]
                                    - c11[al][be][ep]
                                        * (dv10[ep][de][ga] - dv10[ep][ga][de]));
                        }
                        out[be][al][ga][de] = v;
                    }
                }
            }
        }
        out
    }

    /// The full row set for this point, in [`ROW_NAMES`] order.
    pub fn report(&self) -> ComparisonReport {
        let m = self.sub.m;
        let mut rows = Vec::with_capacity(ROW_NAMES.len());

        rows.push(make_row(
            "compare.intrinsic-metric",
            &flat2(&values2(&self.intr.g)),
            &flat2(&values2(&self.sub.g_t)),
            TOL_INTRINSIC_METRIC,
            false,
        ));
        let (ab_lhs, ab_rhs) = self.adapted_basis_sides();
        rows.push(make_row(
            "compare.adapted-basis",
            &ab_lhs,
            &ab_rhs,
            TOL_DEFINITIONAL,
            false,
        ));
        let (ci_lhs, ci_rhs) = self.commutator_sides(&self.intr.n_conn);
        rows.push(make_row(
            "compare.brackets.intrinsic",
            &ci_lhs,
            &ci_rhs,
            TOL_ASSERTED,
            false,
        ));
        let (cn_lhs, cn_rhs) = self.commutator_sides(&self.sub.n_sub);
        rows.push(make_row(
            "compare.brackets.induced",
            &cn_lhs,
            &cn_rhs,
            TOL_ASSERTED,
            false,
        ));
        rows.push(make_row(
            "compare.connection-difference",
            &flat2(&self.connection_difference_literal()),
            &flat2(&self.connection_difference()),
            TOL_INFORMATIONAL,
            true,
        ));
        let bd = self.bracket_difference_tensors();
        rows.push(make_row(
            "compare.d100",
            &flat3(&bd.d100),
            &flat3(&bd.r01_difference),
            TOL_DIFFERENCE,
            false,
        ));
        rows.push(make_row(
            "compare.d101",
            &flat3(&bd.d101),
            &flat3(&bd.b_difference),
            TOL_DIFFERENCE,
            false,
        ));
        let tang = self.sub.tangent.values();
        let intc = self.intr.conn.values();
        rows.push(make_row(
            "compare.c01",
            &flat3(&intc.c01),
            &flat3(&tang.c01),
            TOL_ASSERTED,
            false,
        ));
        rows.push(make_row(
            "compare.c11",
            &flat3(&intc.c11),
            &flat3(&tang.c11),
            TOL_ASSERTED,
            false,
        ));
        let deltas = self.deformation_deltas();
        rows.push(make_row(
            "compare.delta-h00",
            &flat3(&deltas.h00_literal),
            &flat3(&deltas.h00_oracle),
            TOL_INFORMATIONAL,
            true,
        ));
        rows.push(make_row(
            "compare.delta-v10",
            &flat3(&deltas.v10_literal),
            &flat3(&deltas.v10_oracle),
            TOL_INFORMATIONAL,
            true,
        ));
        rows.push(make_row(
            "compare.delta-v10-remainder",
            &flat3(&deltas.remainder_literal),
            &flat3(&deltas.remainder_oracle),
            TOL_INFORMATIONAL,
            true,
        ));
        let comps = self.deformation_tensor_components();
        rows.push(make_row(
            "compare.deformation-hh-h",
            &flat3(&comps.hh_horizontal_literal),
            &flat3(&comps.hh_horizontal_oracle),
            TOL_INFORMATIONAL,
            true,
        ));
        rows.push(make_row(
            "compare.deformation-hh-v",
            &flat3(&comps.hh_vertical_literal),
            &flat3(&comps.hh_vertical_oracle),
            TOL_INFORMATIONAL,
            true,
        ));
        rows.push(make_row(
            "compare.deformation-hv-h",
            &flat3(&comps.hv_horizontal),
            &flat3(&zeros3(m)),
            0.0,
            false,
        ));
        rows.push(make_row(
            "compare.deformation-hv-v",
            &flat3(&comps.hv_vertical_literal),
            &flat3(&comps.hv_vertical_oracle),
            TOL_INFORMATIONAL,
            true,
        ));
        rows.extend(self.torsion_comparison());
        rows.extend(self.curvature_comparison());

        debug_assert_eq!(rows.len(), ROW_NAMES.len());
        debug_assert!(rows.iter().zip(ROW_NAMES).all(|(r, n)| r.name == *n));
        ComparisonReport { rows }
    }
}

/// Intrinsic nonlinear connection at one parameter-bundle point.
pub fn intrinsic_nonlinear_connection(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<Vec<Vec<f64>>> {
    Ok(CompareContext::build(model, imm, pt)?.intrinsic_nonlinear_connection())
}

/// Intrinsic metrical connection blocks at one parameter-bundle point.
pub fn intrinsic_metrical_connection(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<ConnBlocksAtPoint> {
    Ok(CompareContext::build(model, imm, pt)?.intrinsic_metrical_connection())
}

/// Connection difference `D` at one parameter-bundle point.
pub fn connection_difference(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<Vec<Vec<f64>>> {
    Ok(CompareContext::build(model, imm, pt)?.connection_difference())
}

/// Full comparison report at one parameter-bundle point.
pub fn comparison_report(
    model: &MetricModel,
    imm: &Immersion,
    pt: &SubPoint,
) -> Result<ComparisonReport> {
    Ok(CompareContext::build(model, imm, pt)?.report())
}
