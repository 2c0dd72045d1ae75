//! Numerical laboratory for metric connections on slit tangent bundles.
//!
//! Given a positively 2-homogeneous energy function `F^2(x, y)` on a chart
//! (Riemannian, Randers, or user-supplied) this crate constructs the full
//! connection apparatus it induces on the slit tangent bundle: fundamental
//! and lifted metric tensors, canonical spray, nonlinear connection, the
//! metrical connection blocks, their torsion and curvature tensors, and the
//! induced versions of all of these along an immersed submanifold, together
//! with the intrinsic geometry the submanifold carries on its own account.
//!
//! Every derived object is backed by an independent verification route
//! (finite differences, operator commutators, or classical closed forms) and
//! the [`harness`] module packages those cross-checks into scenario-driven
//! pass/fail reports.
//!
//! All derivative bookkeeping rests on [`jet`]: dense truncated Taylor
//! arithmetic with validity tracking, so the geometry code never hand-rolls
//! a chain rule.

pub mod ambient;
pub mod compare;
pub mod error;
pub mod field;
pub mod harness;
pub mod jet;
pub mod linalg;
pub mod metric;
pub mod submanifold;

pub use error::{Error, Result};
