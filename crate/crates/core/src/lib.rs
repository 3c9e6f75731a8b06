//! Finite-volume laboratory for gauge-twist correlation bounds in gapped
//! U(1)-symmetric lattice models.
//!
//! The crate constructs every object in the imaginary-gauge argument for
//! stretched-exponential decay of off-diagonal correlations — lattices with
//! certified sphere-growth dimension, sector Hamiltonians, gapped ground
//! sectors, twist generators and twisted Hamiltonians, contour-integral
//! projectors — and verifies each inequality of the argument by exact
//! computation on small systems.

pub mod cli;
pub mod config;
pub mod decay;
pub mod error;
pub mod hilbert;
pub mod lattice;
pub mod model;
pub mod operator;
pub mod report;
pub mod resolvent;
pub mod spectral;
pub mod twist;

pub use error::{Error, Result};
