//! Desk-scale finite-difference laboratory for Navier problems of the
//! biharmonic operator with first-order nonlinear perturbations
//! `bilap u + Q(x, u, grad u, lap u) = 0` on the unit square.
//!
//! The crate builds up from grid calculus and banded linear algebra to the
//! nonlinear solution map, boundary-data probes, gauge-aware coefficient
//! recovery, and a quantitative density/sweep toolchain, all exposed through
//! the `bilab` command-line harness.

pub mod band;
pub mod cauchy;
pub mod clamped;
pub mod config;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod nonlinearity;
pub mod operator;
pub mod quadrature;
pub mod recovery;
pub mod report;
pub mod runge;
pub mod second_map;
pub mod solution_map;

pub use error::{Error, Result};
