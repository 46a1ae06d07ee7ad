//! Hybridised Nitsche coupling of finite and boundary elements for the
//! Laplace transmission problem in three dimensions.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bem;
pub mod coupling;
pub mod error;
pub mod fem;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod quadrature;
pub mod solvers;

pub use error::{Error, Result, SolverError};
