//! Numerical laboratory for the asymptotics of analytic gradient flows.
//!
//! The crate is `no_std` (with `alloc`) and carries all of the algorithmic
//! machinery: analytic scalar fields with exact second-order jets, the
//! Hessian kernel reduction, an arclength gradient-flow integrator, the
//! asymptotic analyzers that measure exponents and secant lengths, and the
//! gauge-invariant toy and SU(2) lattice diagnostics. File formats, the CLI
//! and scenario orchestration live in the `secantlab` crate.

#![no_std]
// Negated comparisons are deliberate: they treat NaN as failing the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Whenever std is in the crate graph its inherent float methods shadow
// `num_traits::Float`, hence the `allow` on each of those imports.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod error;
pub mod expr;
pub mod field;
pub mod fit;
pub mod flow;
pub mod gauge;
pub mod jet;
pub mod linalg;
pub mod reduction;

pub use error::{Error, Result};
pub use field::{AnalyticField, RadialSplit};
pub use jet::Jet2;
