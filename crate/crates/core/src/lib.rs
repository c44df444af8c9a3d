//! Numerical laboratory for p-elliptic complex-coefficient operators
//! `div(A grad u) + B . grad u` on half-space strips.

pub mod coefficients;
pub mod config;
pub mod ellipticity;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod solver;

pub use error::{PellError, Result};
