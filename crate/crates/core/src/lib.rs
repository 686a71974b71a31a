//! Numerical toolkit for thermal, ground and microcanonical states of local
//! spin Hamiltonians on finite interaction graphs.

pub mod budget;
pub mod clusterexp;
pub mod correlations;
pub mod densequantum;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod quadrature;
pub mod rng;
pub mod sectors;
pub mod stability;
pub mod statmech;

pub use error::{LabError, Result};
