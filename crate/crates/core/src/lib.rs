//! Nonconforming P1 finite elements for gradient-constrained evolution
//! problems, regularized by a power law.
//!
//! [`mesh`] builds triangulations, [`femspace`] holds the Crouzeix–Raviart
//! operators, [`biot_savart`] the dense thin-film form, [`models`] the three
//! physical cases, [`solver`] the time stepping and [`analytic`] the reference
//! solutions. [`cli`] is the `qvi-fem` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod biot_savart;
pub mod cli;
pub mod error;
pub mod femspace;
pub mod linalg;
pub mod mesh;
pub mod models;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
