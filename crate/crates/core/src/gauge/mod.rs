//! Gauge symmetry: finite-dimensional group actions and SU(2) lattice flows.

pub mod lattice;
pub mod quat;
pub mod toy;
