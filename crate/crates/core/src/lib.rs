//! Numerical laboratory for the pseudo-exponential dichotomy of linear
//! retarded functional differential equations `x'(t) = L(t, x_t)` with small
//! delay.
//!
//! The crate builds the special matrix solution `Phi(t, t0)`, the limit
//! functional `l(t0, phi)` and the induced projections `P`/`Q`, evaluates the
//! explicit dichotomy constants, and checks every estimate empirically.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which is what the tolerances in
//! the test-suite assume.

// NaN-rejecting guards are written as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod constants;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod segment;
pub mod special;
pub mod splitting;
pub mod stepper;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{DelayKernel, ThetaShape, TimeProfile, ValidationGrid, ValidationReport};
pub use scalar::Real;
pub use segment::{HistorySegment, Segment};

pub type Kernel = model::DelayKernel<f64>;
pub type Segment64 = segment::HistorySegment<f64>;
pub type Mat = linalg::Matrix<f64>;
pub type Constants = constants::DichotomyConstants<f64>;
pub type Solution = stepper::DenseSolution<f64>;
pub type SpecialTable = special::SpecialSolutionTable<f64>;
pub type Split<'k> = splitting::Splitting<'k, f64>;
