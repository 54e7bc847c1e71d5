//! Finite-lattice toolkit for two-weight inequalities of the vector-valued
//! positive operator `T_α f = {α_I E_I^μ f}_I`.
//!
//! - [`lattice`]: lattices, weights, instances, documents, random instances.
//! - [`operators`]: averages, `T_α`, the maximal function, mixed norms.
//! - [`testing`]: testing constants `C₁`, `C₂`, operator-norm oracles, verdicts.
//! - [`prooftools`]: stopping-time chain certificate, Doob check, the Rubio de
//!   Francia majorant and the reduction comparison.
//! - [`cantor`]: the Cantor-measure counterexample, closed form and materialized.

pub mod cantor;
pub mod error;
pub mod lattice;
pub mod operators;
pub mod prooftools;
pub mod testing;

pub use error::{Error, Result};
pub use lattice::{CellId, ExponentPair, Instance, Lattice, Measure, SimpleFunction, Weight};
