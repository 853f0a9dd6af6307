//! Finite-difference laboratory for two interacting progressing waves in a
//! semilinear wave equation whose nonlinear coefficient jumps across an
//! interface.

pub mod cli;
pub mod config;
mod error;
pub mod fields;
pub mod geometry;
pub mod inversion;
pub(crate) mod linalg;
pub mod raytrace;
pub mod regression;
pub mod response;
pub mod snapshot;
pub mod solver;

pub use error::{Category, Error};
