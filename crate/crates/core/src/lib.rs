//! Explicit space-time finite differences for 1+1 dimensional stochastic
//! reaction-diffusion equations on the torus, with tools for measuring the
//! strong error in discrete Besov norms.

pub mod besov;
pub mod error;
pub mod grid;
pub mod lab;
pub mod noise;
pub mod scheme;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec};
