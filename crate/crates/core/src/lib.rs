//! Certification and falsification of symmetric spectral functions that
//! preserve positive semidefiniteness of block matrices.
//!
//! A symmetric function `f` on the nonnegative orthant acts on a PSD matrix
//! through its eigenvalues, `f(A) = f(lambda_1(A), ..., lambda_m(A))`. The
//! crate checks whether `[f(A_ab)]` stays PSD for PSD block matrices `[A_ab]`
//! with PSD blocks, using the explicit constructions behind the known
//! necessary conditions:
//!
//! * [`absmono`]: finite-difference certification of absolute monotonicity,
//!   mollification and coefficient recovery.
//! * [`construct`]: Vandermonde node families, moment vectors and the linear
//!   functional isolating one Taylor coefficient.
//! * [`witness`]: the two-block reversal construction refuting functions that
//!   are not series in `x_1 ... x_m`, Gram witnesses and random search.
//! * [`blockpsd`] and [`linalg`]: block matrices, generators and the dense
//!   Hermitian linear algebra underneath.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod absmono;
pub mod blockpsd;
pub mod cli;
pub mod construct;
pub mod error;
pub mod linalg;
pub mod report;
pub mod symfun;
pub mod witness;

pub use error::{Error, Result};
pub use linalg::{CMatrix, HermitianMatrix, PsdVerdict};
pub use report::{CheckReport, Verdict, Witness};
pub use symfun::{MultiIndex, SymmetricFunction};
