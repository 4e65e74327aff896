//! Limit spectral measure of separable sample covariance matrices
//! `Σ Σ*` with `Σ = D^{1/2} X D̃^{1/2}`.
//!
//! Given the limit spectra `nu`, `nu_tilde` of `D`, `D̃` (finite atomic
//! measures) and the ratio `c = N/n`, this crate computes the density of the
//! limit measure, its atom at zero, the exact support intervals and the
//! square-root behavior at each edge, and simulates finite matrices to check
//! all of it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod edges;
pub mod error;
pub mod measures;
pub mod montecarlo;
pub mod solver;
pub mod support;

pub mod cli;

pub use error::{Error, Result};
pub use num_complex;
pub use measures::{Atom, AtomicMeasure, DualComponents, Interval};
pub use solver::{ModelSpec, SolverPoint};
