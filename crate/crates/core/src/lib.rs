//! Numerical audit lab for L⁶ decoupling estimates on the truncated
//! paraboloid in ℝ⁴.
//!
//! The crate is organised bottom-up:
//!
//! - [`scale`]: the dyadic scale λ and derived lengths r, ρ, D, α.
//! - [`geometry`]: paraboloid normals, wedge norms, Gram determinants, Broad₃.
//! - [`caps`]: separated cap lattices, greedy coloring, annuli.
//! - [`tubes`]: wave-packet tubes, overlaps, multiplicity, Cauchy–Schwarz.
//! - [`phase`]: six-fold phases, baskets and sextuple dichotomies.
//! - [`shell`]: polynomial shells over the rescaled box.
//! - [`ledger`]: exact exponent bookkeeping.
//! - [`lab`]: experiment registry, reports, ladder fits and the L⁶ probe.
//!
//! All randomness flows through [`mc::Key`], so results are reproducible and
//! independent of the number of worker threads.

// NaN-rejecting `!(x > 0.0)` guards are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod caps;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod lab;
pub mod ledger;
pub mod mc;
pub mod phase;
pub mod scale;
pub mod shell;
pub mod tubes;
pub mod vecmath;

pub use error::{Error, Result};
pub use scale::ScaleParams;
