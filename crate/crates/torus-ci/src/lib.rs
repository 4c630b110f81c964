//! Spectral laboratory for convex integration of the stochastic 2D Navier-Stokes
//! equations on the unit torus.

pub mod antidiv;
pub mod cli;
pub mod error;
pub mod field;
pub mod harmonic;
pub mod heat;
pub mod iteration;
pub mod jets;
pub mod noise;
pub mod quad;

pub use error::{Error, Result};
