//! Numerical workbench for Schrodinger operators with an inverse-square
//! potential, `L_a = -Delta + a |x|^{-2}` on radial functions in R^d.

pub mod cli;
pub mod error;
pub mod harness;
pub mod hankel;
pub mod kernels;
pub mod morawetz;
pub mod quad;
pub mod specfun;
pub mod spectrum;

pub use error::{Error, Result};
