//! Numerical toolkit for semilinear time-fractional evolution equations
//!
//! `D_t^α(u − u₀) + Au + B(t, u) = f(t)`, `0 < α < 1`,
//!
//! with `A` a positive self-adjoint operator given spectrally. The crate
//! provides special functions, discrete fractional calculus, the
//! subordination solution operators, Picard solvers, blow-up continuation and
//! diagnostic checks.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision, clippy::type_complexity)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fraccalc;
pub mod mild;
pub mod operators;
pub mod quad;
pub mod specfun;
mod weights;

pub use error::{Error, Result};
