//! Flat-torus Green's functions, critical-point census, singular admissibility
//! functionals for vortex blow-up and the radial two-component Liouville system.

pub mod admissibility;
pub mod census;
pub mod green;
pub mod lattice;
pub mod liouville;
pub mod numeric;
pub mod partition;
pub mod potentials;
pub mod quadrature;

pub use green::{GreenError, GreenEvaluation, GreenFunction};
pub use lattice::{LatticeBasis, LatticeError, TorusPoint};
