//! Numerical laboratory for sparse bounds of square functions built from
//! the heat semigroup of `-Δ` on the periodic unit interval.
//!
//! The crate covers dyadic lattices and sparse families, Muckenhoupt and
//! reverse Hölder characteristics of weights, exponent bookkeeping, the heat
//! semigroup with its square and maximal functions, the stopping-time
//! construction of sparse families, and closed-form sharpness examples.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod corpus;
pub mod error;
pub mod exponents;
pub mod grid;
pub mod heatlp;
pub mod lattice;
pub mod sharpness;
pub mod sparse;
pub mod weights;

pub use error::{Error, Result};
pub use exponents::ExponentProfile;
pub use grid::SampledFunction;
pub use heatlp::{SquareFunctionKind, TimeGrid};
pub use lattice::{DyadicInterval, Interval, SparseFamily, Witness};
pub use sparse::{SparseBuildConfig, SparseFormReport};
pub use weights::{ScanFamily, Weight};
