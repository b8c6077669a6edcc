//! Numerical laboratory for the axisymmetric hydrostatic Euler equations in
//! vorticity form and their ε-rescaled counterpart.
//!
//! The radial direction is handled in the area coordinate `a = r²/2 ∈ (0, 1/2)`,
//! the periodic direction `x ∈ ℝ/ℤ` spectrally.

pub mod blowup_lab;
pub mod diagnostics;
pub mod dirichlet_green;
pub mod entropy_lab;
pub mod error;
pub mod experiments;
pub mod hydro_solver;
pub mod io;
pub mod radial_calculus;
pub mod rescaled_solver;
pub mod spectral_x;

pub use error::{Error, Result};
pub use hydro_solver::{FlowState, Solver, SolverConfig};
pub use radial_calculus::RadialGrid;
pub use spectral_x::{Field2D, SpectralX};
