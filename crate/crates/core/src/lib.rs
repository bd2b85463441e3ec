//! Exact Lipschitzian bounds, feasible-set distances and coderivative
//! certificates for block-perturbed linear inequality systems, with a
//! conjugate linearization for convex systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex;
pub mod demo;
pub mod document;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod report;
pub mod stability;

pub use error::{Error, Result};
